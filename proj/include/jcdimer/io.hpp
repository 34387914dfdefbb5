#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jcdimer/hilbert.hpp"

namespace jcd::io {

namespace fs = std::filesystem;

// Writes to a sibling temp file, flushes, then renames over `path`.
void atomic_write(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

// Columns of equal length, written with 17 significant digits.
std::string csv_table(const std::vector<std::string>& names, const std::vector<const std::vector<double>*>& columns);
// Rows of a matrix with a leading label column.
std::string csv_matrix(const std::string& label_name, const std::vector<double>& labels,
                       const std::vector<double>& header, const Eigen::MatrixXd& m);

struct CsvTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    const std::vector<double>& column(const std::string& name) const;  // throws FormatError
};
CsvTable parse_csv(const std::string& text);

// Binary state container: "JCDIMER\0", u32 version, u32 kind, i32 eta,
// i32 cap (-1 when absent), u32 scalar bytes (8 or 16), basis-ordering
// string, i64 dim, then little-endian complex payload.
enum class PayloadKind : std::uint32_t { state_vector = 1, density_matrix = 2 };

struct StateFile {
    PayloadKind kind = PayloadKind::state_vector;
    int eta = 0;
    std::optional<int> cap;
    std::int64_t dim = 0;
    Eigen::VectorXcd data;  // state, or column-major density matrix
};

std::string encode_state(const HilbertSpace& space, const StateVector& psi, bool single_precision = false);
std::string encode_density(const HilbertSpace& space, const Eigen::MatrixXcd& rho);
// Throws FormatError on a bad magic, version or truncated payload.
StateFile decode_state(const std::string& bytes);

// key = value lines; '#' starts a comment; [section] prefixes keys with
// "section.". Duplicate keys are rejected.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
    static KeyValueConfig load(const fs::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    const std::string& origin() const noexcept { return origin_; }

    // Typed access; errors name the key.
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    // Keys not in `known` raise ConfigError; a near miss on the unit suffix
    // is reported as a unit error.
    void require_known(const std::vector<std::string>& known) const;
    std::string canonical() const;  // sorted key = value lines, used for hashing

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

}  // namespace jcd::io
