#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "jcdimer/errors.hpp"

namespace jcd::ode {

struct Tolerance {
    double rtol = 1e-9;
    double atol = 1e-12;
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;
};

// Dormand-Prince 8(5,3) explicit Runge-Kutta pair with Hairer's error
// estimator. Vec is any Eigen column vector (real or complex). The
// integrator stops exactly at every requested output time instead of using
// dense output.
template <class Vec>
class Dop853 {
public:
    using Rhs = std::function<void(double t, const Vec& y, Vec& dydt)>;

    Dop853(Rhs rhs, Tolerance tol) : rhs_(std::move(rhs)), tol_(tol) {}

    // Advances y from t to t_end (t_end > t or t_end < t). h is the step
    // guess in/out; pass 0 to let the integrator choose.
    void advance(double& t, Vec& y, double t_end, double& h) {
        if (t == t_end) return;
        const double dir = t_end > t ? 1.0 : -1.0;
        if (k1_.size() != y.size()) {
            k1_.resize(y.size());
        }
        rhs_(t, y, k1_);
        ++stats_.evaluations;
        if (h == 0.0) h = initial_step(t, y, dir);
        h = dir * std::abs(h);
        const double h_min = 1e-14 * std::max(1.0, std::abs(t_end));
        bool last_rejected = false;
        while (dir * (t_end - t) > 0.0) {
            bool final = false;
            double h_try = h;
            if (dir * (t + h - t_end) >= 0.0) {
                h_try = t_end - t;
                final = true;
            }
            if (std::abs(h_try) < h_min) {
                throw StepSizeUnderflow("DOP853 step size underflow at t=" + std::to_string(t));
            }
            const double err = attempt(t, y, h_try);
            if (err <= 1.0 && std::isfinite(err)) {
                ++stats_.accepted;
                t = final ? t_end : t + h_try;
                y = y_new_;
                k1_ = k13_;
                const double fac = std::clamp(std::pow(std::max(err, 1e-30), 1.0 / 8.0) / 0.9, 1.0 / 6.0, 3.0);
                double h_next = h_try / fac;
                if (last_rejected) h_next = dir * std::min(std::abs(h_next), std::abs(h_try));
                last_rejected = false;
                // A step clipped to the output time keeps the earlier suggestion.
                h = final ? dir * std::max(std::abs(h_next), std::abs(h)) : h_next;
            } else {
                ++stats_.rejected;
                last_rejected = true;
                const double fac = std::isfinite(err) ? std::pow(err, 1.0 / 8.0) / 0.9 : 10.0;
                h = h_try / std::clamp(fac, 1.0, 10.0);
            }
        }
    }

    const StepStats& stats() const noexcept { return stats_; }

private:
    double initial_step(double t, const Vec& y, double dir) {
        const double d0 = scaled_norm(y, y);
        const double d1 = scaled_norm(k1_, y);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        Vec y1 = y + dir * h0 * k1_;
        Vec f1(y.size());
        rhs_(t + dir * h0, y1, f1);
        ++stats_.evaluations;
        const double d2 = scaled_norm(Vec(f1 - k1_), y) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 8.0);
        return std::min(100 * h0, h1);
    }

    double scaled_norm(const Vec& v, const Vec& ref) const {
        const auto sk = (tol_.atol + tol_.rtol * ref.array().abs()).eval();
        return std::sqrt((v.array().abs() / sk).square().sum() / static_cast<double>(v.size()));
    }

    double attempt(double t, const Vec& y, double h);

    Rhs rhs_;
    Tolerance tol_;
    StepStats stats_;
    Vec k1_, k2_, k3_, k4_, k5_, k6_, k7_, k8_, k9_, k10_, k11_, k12_, k13_, y_new_, tmp_;
};

namespace dop853_coef {
// Hairer & Wanner, DOP853.
inline constexpr double c2 = 0.526001519587677318785587544488e-01;
inline constexpr double c3 = 0.789002279381515978178381316732e-01;
inline constexpr double c4 = 0.118350341907227396726757197510e+00;
inline constexpr double c5 = 0.281649658092772603273242802490e+00;
inline constexpr double c6 = 0.333333333333333333333333333333e+00;
inline constexpr double c7 = 0.25e+00;
inline constexpr double c8 = 0.307692307692307692307692307692e+00;
inline constexpr double c9 = 0.651282051282051282051282051282e+00;
inline constexpr double c10 = 0.6e+00;
inline constexpr double c11 = 0.857142857142857142857142857142e+00;

inline constexpr double a21 = 5.26001519587677318785587544488e-2;
inline constexpr double a31 = 1.97250569845378994544595329183e-2;
inline constexpr double a32 = 5.91751709536136983633785987549e-2;
inline constexpr double a41 = 2.95875854768068491816892993775e-2;
inline constexpr double a43 = 8.87627564304205475450678981324e-2;
inline constexpr double a51 = 2.41365134159266685502369798665e-1;
inline constexpr double a53 = -8.84549479328286085344864962717e-1;
inline constexpr double a54 = 9.24834003261792003115737966543e-1;
inline constexpr double a61 = 3.7037037037037037037037037037e-2;
inline constexpr double a64 = 1.70828608729473871279604482173e-1;
inline constexpr double a65 = 1.25467687566822425016691814123e-1;
inline constexpr double a71 = 3.7109375e-2;
inline constexpr double a74 = 1.70252211019544039314978060272e-1;
inline constexpr double a75 = 6.02165389804559606850219397283e-2;
inline constexpr double a76 = -1.7578125e-2;
inline constexpr double a81 = 3.70920001185047927108779319836e-2;
inline constexpr double a84 = 1.70383925712239993810214054705e-1;
inline constexpr double a85 = 1.07262030446373284651809199168e-1;
inline constexpr double a86 = -1.53194377486244017527936158236e-2;
inline constexpr double a87 = 8.27378916381402288758473766002e-3;
inline constexpr double a91 = 6.24110958716075717114429577812e-1;
inline constexpr double a94 = -3.36089262944694129406857109825e0;
inline constexpr double a95 = -8.68219346841726006818189891453e-1;
inline constexpr double a96 = 2.75920996994467083049415600797e1;
inline constexpr double a97 = 2.01540675504778934086186788979e1;
inline constexpr double a98 = -4.34898841810699588477366255144e1;
inline constexpr double a101 = 4.77662536438264365890433908527e-1;
inline constexpr double a104 = -2.48811461997166764192642586468e0;
inline constexpr double a105 = -5.90290826836842996371446475743e-1;
inline constexpr double a106 = 2.12300514481811942347288949897e1;
inline constexpr double a107 = 1.52792336328824235832596922938e1;
inline constexpr double a108 = -3.32882109689848629194453265587e1;
inline constexpr double a109 = -2.03312017085086261358222928593e-2;
inline constexpr double a111 = -9.3714243008598732571704021658e-1;
inline constexpr double a114 = 5.18637242884406370830023853209e0;
inline constexpr double a115 = 1.09143734899672957818500254654e0;
inline constexpr double a116 = -8.14978701074692612513997267357e0;
inline constexpr double a117 = -1.85200656599969598641566180701e1;
inline constexpr double a118 = 2.27394870993505042818970056734e1;
inline constexpr double a119 = 2.49360555267965238987089396762e0;
inline constexpr double a1110 = -3.0467644718982195003823669022e0;
inline constexpr double a121 = 2.27331014751653820792359768449e0;
inline constexpr double a124 = -1.05344954667372501984066689879e1;
inline constexpr double a125 = -2.00087205822486249909675718444e0;
inline constexpr double a126 = -1.79589318631187989172765950534e1;
inline constexpr double a127 = 2.79488845294199600508499808837e1;
inline constexpr double a128 = -2.85899827713502369474065508674e0;
inline constexpr double a129 = -8.87285693353062954433549289258e0;
inline constexpr double a1210 = 1.23605671757943030647266201528e1;
inline constexpr double a1211 = 6.43392746015763530355970484046e-1;

inline constexpr double b1 = 5.42937341165687622380535766363e-2;
inline constexpr double b6 = 4.45031289275240888144113950566e0;
inline constexpr double b7 = 1.89151789931450038304281599044e0;
inline constexpr double b8 = -5.8012039600105847814672114227e0;
inline constexpr double b9 = 3.1116436695781989440891606237e-1;
inline constexpr double b10 = -1.52160949662516078556178806805e-1;
inline constexpr double b11 = 2.01365400804030348374776537501e-1;
inline constexpr double b12 = 4.47106157277725905176885569043e-2;

inline constexpr double bhh1 = 0.244094488188976377952755905512e+00;
inline constexpr double bhh2 = 0.733846688281611857341361741547e+00;
inline constexpr double bhh3 = 0.220588235294117647058823529412e-01;

inline constexpr double er1 = 0.1312004499419488073250102996e-01;
inline constexpr double er6 = -0.1225156446376204440720569753e+01;
inline constexpr double er7 = -0.4957589496572501915214079952e+00;
inline constexpr double er8 = 0.1664377182454986536961530415e+01;
inline constexpr double er9 = -0.3503288487499736816886487290e+00;
inline constexpr double er10 = 0.3341791187130174790297318841e+00;
inline constexpr double er11 = 0.8192320648511571246570742613e-01;
inline constexpr double er12 = -0.2235530786388629525884427845e-01;
}  // namespace dop853_coef

template <class Vec>
double Dop853<Vec>::attempt(double t, const Vec& y, double h) {
    using namespace dop853_coef;
    const auto n = y.size();
    auto stage = [&](Vec& k, double c, const auto& incr) {
        tmp_ = y + h * incr;
        k.resize(n);
        rhs_(t + c * h, tmp_, k);
        ++stats_.evaluations;
    };
    stage(k2_, c2, a21 * k1_);
    stage(k3_, c3, a31 * k1_ + a32 * k2_);
    stage(k4_, c4, a41 * k1_ + a43 * k3_);
    stage(k5_, c5, a51 * k1_ + a53 * k3_ + a54 * k4_);
    stage(k6_, c6, a61 * k1_ + a64 * k4_ + a65 * k5_);
    stage(k7_, c7, a71 * k1_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    stage(k8_, c8, a81 * k1_ + a84 * k4_ + a85 * k5_ + a86 * k6_ + a87 * k7_);
    stage(k9_, c9, a91 * k1_ + a94 * k4_ + a95 * k5_ + a96 * k6_ + a97 * k7_ + a98 * k8_);
    stage(k10_, c10, a101 * k1_ + a104 * k4_ + a105 * k5_ + a106 * k6_ + a107 * k7_ + a108 * k8_ + a109 * k9_);
    stage(k11_, c11,
          a111 * k1_ + a114 * k4_ + a115 * k5_ + a116 * k6_ + a117 * k7_ + a118 * k8_ + a119 * k9_ + a1110 * k10_);
    stage(k12_, 1.0,
          a121 * k1_ + a124 * k4_ + a125 * k5_ + a126 * k6_ + a127 * k7_ + a128 * k8_ + a129 * k9_ + a1210 * k10_ +
              a1211 * k11_);

    Vec incr = b1 * k1_ + b6 * k6_ + b7 * k7_ + b8 * k8_ + b9 * k9_ + b10 * k10_ + b11 * k11_ + b12 * k12_;
    y_new_ = y + h * incr;

    const auto sk = (tol_.atol + tol_.rtol * y.array().abs().max(y_new_.array().abs())).eval();
    const auto e3 = ((incr - bhh1 * k1_ - bhh2 * k9_ - bhh3 * k12_).array().abs() / sk).square().sum();
    const auto e5 = ((er1 * k1_ + er6 * k6_ + er7 * k7_ + er8 * k8_ + er9 * k9_ + er10 * k10_ + er11 * k11_ +
                      er12 * k12_)
                         .array()
                         .abs() /
                     sk)
                        .square()
                        .sum();
    double deno = e5 + 0.01 * e3;
    if (deno <= 0.0) deno = 1.0;
    const double err = std::abs(h) * e5 / std::sqrt(static_cast<double>(n) * deno);

    if (err <= 1.0 && std::isfinite(err)) {
        k13_.resize(n);
        rhs_(t + h, y_new_, k13_);
        ++stats_.evaluations;
    }
    return err;
}

}  // namespace jcd::ode
