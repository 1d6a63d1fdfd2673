#ifndef BIOAGE_IO_HPP
#define BIOAGE_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioage/errors.hpp"
#include "bioage/ibm.hpp"
#include "bioage/moments.hpp"
#include "bioage/pde.hpp"

namespace bioage {

// All numeric output goes through this: 17 significant digits round-trip a
// double exactly and hash identically across platforms.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ParseError("expected a number, got '" + s + "'");
    return v;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string digest_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& text,
                                                      const std::string& expected_header) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV document");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
        throw ParseError("unexpected CSV header '" + line + "', wanted '" + expected_header + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Histogram CSV: bin_left,bin_right,count,density. Every regular bin is
// emitted; the overflow bin is the final row with bin_right = inf.
// ---------------------------------------------------------------------------

inline std::string emit_histogram_csv(const Histogram& h) {
    std::string out = "bin_left,bin_right,count,density\n";
    for (size_t i = 0; i < h.n_bins(); ++i) {
        out += format_double(static_cast<double>(i) * h.bin_width) + "," +
               format_double(static_cast<double>(i + 1) * h.bin_width) + "," +
               std::to_string(h.counts[i]) + "," + format_double(h.density(i)) + "\n";
    }
    out += format_double(h.b_max) + ",inf," + std::to_string(h.overflow) + "," +
           format_double(h.total == 0 ? 0.0
                                      : static_cast<double>(h.overflow) /
                                            (static_cast<double>(h.total) * h.bin_width)) +
           "\n";
    return out;
}

inline Histogram parse_histogram_csv(const std::string& text) {
    const auto rows = detail::read_csv(text, "bin_left,bin_right,count,density");
    if (rows.size() < 2) throw ParseError("histogram CSV has no bins");
    Histogram h;
    for (size_t i = 0; i + 1 < rows.size(); ++i) {
        if (rows[i].size() != 4) throw ParseError("histogram CSV row has wrong arity");
        h.counts.push_back(std::strtoull(rows[i][2].c_str(), nullptr, 10));
    }
    const auto& first = rows.front();
    const auto& last = rows.back();
    h.bin_width = parse_double(first[1]) - parse_double(first[0]);
    h.b_max = parse_double(last[0]);
    h.overflow = std::strtoull(last[2].c_str(), nullptr, 10);
    h.total = h.overflow;
    for (auto c : h.counts) h.total += c;
    return h;
}

// ---------------------------------------------------------------------------
// Moments CSV: t,k,value,log10_flag (long format, one row per component).
// ---------------------------------------------------------------------------

inline std::string emit_moments_csv(const std::vector<MomentVector>& snapshots) {
    std::string out = "t,k,value,log10_flag\n";
    for (const auto& mv : snapshots) {
        for (int k = 0; k <= mv.order(); ++k) {
            out += format_double(mv.t) + "," + std::to_string(k) + "," +
                   format_double(mv.values[static_cast<size_t>(k)]) + "," +
                   (mv.flagged(k) ? "1" : "0") + "\n";
        }
    }
    return out;
}

inline std::vector<MomentVector> parse_moments_csv(const std::string& text) {
    const auto rows = detail::read_csv(text, "t,k,value,log10_flag");
    std::vector<MomentVector> out;
    for (const auto& row : rows) {
        if (row.size() != 4) throw ParseError("moments CSV row has wrong arity");
        const double t = parse_double(row[0]);
        const int k = static_cast<int>(std::strtol(row[1].c_str(), nullptr, 10));
        if (out.empty() || k == 0) {
            out.emplace_back();
            out.back().t = t;
        }
        MomentVector& mv = out.back();
        if (k != static_cast<int>(mv.values.size()))
            throw ParseError("moments CSV rows out of order");
        mv.values.push_back(parse_double(row[2]));
        mv.log_flags.push_back(row[3] == "1" ? 1 : 0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Density CSV: t,b_center,density (long format).
// ---------------------------------------------------------------------------

inline std::string emit_density_csv(const Grid& grid,
                                    const std::vector<DensityState>& snapshots) {
    std::string out = "t,b_center,density\n";
    for (const auto& s : snapshots) {
        for (int i = 0; i < grid.n_cells; ++i) {
            out += format_double(s.t) + "," + format_double(grid.center(i)) + "," +
                   format_double(s.cell_masses[static_cast<size_t>(i)] / grid.db) + "\n";
        }
    }
    return out;
}

struct DensityTable {
    std::vector<double> times;
    std::vector<double> centers;                 // shared by all snapshots
    std::vector<std::vector<double>> densities;  // one row of values per time
};

inline DensityTable parse_density_csv(const std::string& text) {
    const auto rows = detail::read_csv(text, "t,b_center,density");
    DensityTable table;
    for (const auto& row : rows) {
        if (row.size() != 3) throw ParseError("density CSV row has wrong arity");
        const double t = parse_double(row[0]);
        const double center = parse_double(row[1]);
        if (table.times.empty() || t != table.times.back()) {
            table.times.push_back(t);
            table.densities.emplace_back();
        }
        if (table.times.size() == 1) table.centers.push_back(center);
        table.densities.back().push_back(parse_double(row[2]));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Output session: collects files in one directory, removes them all if the
// run fails, and finalizes with a digest manifest.
// ---------------------------------------------------------------------------

class OutputSession {
public:
    explicit OutputSession(std::string dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::string& dir() const { return dir_; }

    void write_file(const std::string& name, const std::string& content) {
        const std::filesystem::path path = std::filesystem::path(dir_) / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open output file " + path.string());
        out << content;
        out.close();
        digests_[name] = digest_hex(content);
    }

    void write_json(const std::string& name, const nlohmann::json& j) {
        write_file(name, j.dump(2) + "\n");
    }

    // Manifest lists every emitted file with its content digest plus the
    // fully resolved configuration, so a run can be reproduced exactly.
    void finalize(const nlohmann::json& resolved_config) {
        nlohmann::json manifest;
        manifest["digest_algorithm"] = "fnv1a64";
        manifest["files"] = digests_;
        manifest["config"] = resolved_config;
        write_json("manifest.json", manifest);
    }

    // Removes everything written so far (failure path).
    void discard() {
        for (const auto& [name, digest] : digests_) {
            std::error_code ec;
            std::filesystem::remove(std::filesystem::path(dir_) / name, ec);
        }
        digests_.clear();
    }

private:
    std::string dir_;
    std::map<std::string, std::string> digests_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace bioage

#endif
