#include "jcdimer/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "jcdimer/errors.hpp"

namespace jcd::io {

namespace {

constexpr char kMagic[8] = {'J', 'C', 'D', 'I', 'M', 'E', 'R', '\0'};
constexpr std::uint32_t kVersion = 1;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw FormatError("state file truncated in header");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

std::string encode(PayloadKind kind, const HilbertSpace& space, const cplx* data, std::int64_t count,
                   std::int64_t dim, bool single) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(kind));
    put<std::int32_t>(out, space.eta());
    put<std::int32_t>(out, space.excitation_cap() ? *space.excitation_cap() : -1);
    put<std::uint32_t>(out, single ? 8u : 16u);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(kBasisOrdering.size()));
    out.append(kBasisOrdering);
    put<std::int64_t>(out, dim);
    out.reserve(out.size() + static_cast<std::size_t>(count) * (single ? 8 : 16));
    for (std::int64_t i = 0; i < count; ++i) {
        if (single) {
            put<float>(out, static_cast<float>(data[i].real()));
            put<float>(out, static_cast<float>(data[i].imag()));
        } else {
            put<double>(out, data[i].real());
            put<double>(out, data[i].imag());
        }
    }
    return out;
}

std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) return std::nullopt;
    return v;
}

std::string stem(const std::string& key) {
    const auto u = key.rfind('_');
    return u == std::string::npos ? key : key.substr(0, u);
}

bool unit_like(const std::string& key) {
    static const char* units[] = {"hz", "khz", "mhz", "ghz", "s", "ms", "us", "ns", "ps", "rad", "per_us"};
    const auto u = key.rfind('_');
    if (u == std::string::npos) return false;
    const std::string suffix = key.substr(u + 1);
    return std::any_of(std::begin(units), std::end(units), [&](const char* x) { return suffix == x; });
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::random_device rd;
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(rd());
    {
        std::FILE* f = std::fopen(tmp.c_str(), "wb");
        if (!f) throw Error("cannot open " + tmp.string() + " for writing");
        const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size() && std::fflush(f) == 0 &&
                        ::fsync(::fileno(f)) == 0;
        std::fclose(f);
        if (!ok) {
            fs::remove(tmp);
            throw Error("short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string csv_table(const std::vector<std::string>& names, const std::vector<const std::vector<double>*>& columns) {
    if (names.size() != columns.size()) throw FormatError("csv: names and columns differ in count");
    const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
    for (const auto* c : columns)
        if (c->size() != rows) throw FormatError("csv: columns differ in length");
    std::string out;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (j) out += ',';
        out += names[j];
    }
    out += '\n';
    char buf[40];
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (j) out += ',';
            std::snprintf(buf, sizeof buf, "%.17g", (*columns[j])[i]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::string csv_matrix(const std::string& label_name, const std::vector<double>& labels,
                       const std::vector<double>& header, const Eigen::MatrixXd& m) {
    if (static_cast<std::size_t>(m.rows()) != labels.size() || static_cast<std::size_t>(m.cols()) != header.size())
        throw FormatError("csv: matrix shape does not match its labels");
    std::string out = label_name;
    char buf[40];
    for (double h : header) {
        std::snprintf(buf, sizeof buf, ",%.17g", h);
        out += buf;
    }
    out += '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g", labels[static_cast<std::size_t>(r)]);
        out += buf;
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, ",%.17g", m(r, c));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return columns[j];
    throw FormatError("csv has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("csv is empty");
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) t.names.push_back(trim(cell));
    }
    t.columns.resize(t.names.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::istringstream rs(line);
        std::string cell;
        std::size_t j = 0;
        while (std::getline(rs, cell, ',')) {
            if (j >= t.names.size()) throw FormatError("csv row " + std::to_string(row) + " has extra cells");
            const std::string c = trim(cell);
            double v;
            if (c == "nan" || c == "-nan") v = std::numeric_limits<double>::quiet_NaN();
            else if (c == "inf") v = std::numeric_limits<double>::infinity();
            else if (c == "-inf") v = -std::numeric_limits<double>::infinity();
            else if (auto p = parse_number(c)) v = *p;
            else throw FormatError("csv row " + std::to_string(row) + ": '" + c + "' is not a number");
            t.columns[j++].push_back(v);
        }
        if (j != t.names.size()) throw FormatError("csv row " + std::to_string(row) + " is short");
    }
    return t;
}

std::string encode_state(const HilbertSpace& space, const StateVector& psi, bool single_precision) {
    if (psi.size() != space.dim()) throw DimensionGuard("state does not match the Hilbert space");
    return encode(PayloadKind::state_vector, space, psi.data(), psi.size(), space.dim(), single_precision);
}

std::string encode_density(const HilbertSpace& space, const Eigen::MatrixXcd& rho) {
    if (rho.rows() != space.dim() || rho.cols() != space.dim())
        throw DimensionGuard("density matrix does not match the Hilbert space");
    return encode(PayloadKind::density_matrix, space, rho.data(), rho.size(), space.dim(), false);
}

StateFile decode_state(const std::string& bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("not a state file (bad magic)");
    std::size_t pos = sizeof(kMagic);
    const auto version = take<std::uint32_t>(bytes, pos);
    if (version != kVersion) throw FormatError("unsupported state file version " + std::to_string(version));
    StateFile f;
    const auto kind = take<std::uint32_t>(bytes, pos);
    if (kind != 1 && kind != 2) throw FormatError("unknown payload kind " + std::to_string(kind));
    f.kind = static_cast<PayloadKind>(kind);
    f.eta = take<std::int32_t>(bytes, pos);
    const auto cap = take<std::int32_t>(bytes, pos);
    if (cap >= 0) f.cap = cap;
    const auto scalar = take<std::uint32_t>(bytes, pos);
    if (scalar != 8 && scalar != 16) throw FormatError("bad scalar width " + std::to_string(scalar));
    const auto olen = take<std::uint32_t>(bytes, pos);
    if (pos + olen > bytes.size()) throw FormatError("state file truncated in basis ordering");
    const std::string ordering = bytes.substr(pos, olen);
    pos += olen;
    if (ordering != kBasisOrdering) throw FormatError("basis ordering '" + ordering + "' is not supported");
    f.dim = take<std::int64_t>(bytes, pos);
    const std::int64_t count = f.kind == PayloadKind::state_vector ? f.dim : f.dim * f.dim;
    if (f.dim < 0 || bytes.size() - pos != static_cast<std::size_t>(count) * scalar)
        throw FormatError("state file payload size does not match its header");
    f.data.resize(count);
    for (std::int64_t i = 0; i < count; ++i) {
        if (scalar == 8) {
            const float re = take<float>(bytes, pos), im = take<float>(bytes, pos);
            f.data[i] = cplx(re, im);
        } else {
            const double re = take<double>(bytes, pos), im = take<double>(bytes, pos);
            f.data[i] = cplx(re, im);
        }
    }
    return f;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where, "empty key");
        if (!section.empty()) key = section + "." + key;
        if (cfg.values_.count(key)) throw ConfigError(key, "duplicate key at " + where);
        cfg.values_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const fs::path& path) { return parse(read_file(path), path.string()); }

std::string KeyValueConfig::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "required key is missing");
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    const auto v = parse_number(s);
    if (!v) {
        const bool has_letters = std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalpha(c); });
        throw ConfigError(key, has_letters ? "'" + s + "' is not a plain number; the unit belongs in the key name"
                                           : "'" + s + "' is not a number");
    }
    if (!std::isfinite(*v)) throw ConfigError(key, "must be finite");
    return *v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key) const {
    const double v = get_double(key);
    if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(key, "must be an integer");
    return static_cast<std::int64_t>(v);
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key, "'" + s + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_list(const std::string& key) const {
    const std::string s = get_string(key);
    std::vector<double> out;
    std::istringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) continue;
        const auto v = parse_number(cell);
        if (!v) throw ConfigError(key, "'" + cell + "' is not a number");
        out.push_back(*v);
    }
    if (out.empty()) throw ConfigError(key, "empty list");
    return out;
}

void KeyValueConfig::require_known(const std::vector<std::string>& known) const {
    for (const auto& [key, value] : values_) {
        if (std::find(known.begin(), known.end(), key) != known.end()) continue;
        for (const auto& k : known)
            if (unit_like(k) && unit_like(key) && stem(k) == stem(key))
                throw ConfigError(key, "unrecognized unit suffix; expected '" + k + "'");
        throw ConfigError(key, "unknown key");
    }
}

std::string KeyValueConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

}  // namespace jcd::io
