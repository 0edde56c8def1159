#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdreg {

// Shortest representation that round-trips the exact double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a_hash(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Column-ordered table written as CSV. The first line is a comment carrying the
// config hash and master seed, so identical runs produce identical bytes.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != columns_.size())
            throw std::invalid_argument("CsvTable: row width mismatch");
        rows_.push_back(std::move(cells));
    }

    size_t row_count() const { return rows_.size(); }

    std::string serialize(std::uint64_t config_hash, std::uint64_t seed) const {
        std::string out;
        out += "# config_hash=" + std::to_string(config_hash) + " seed=" + std::to_string(seed) + "\n";
        for (size_t i = 0; i < columns_.size(); ++i) {
            if (i) out += ',';
            out += columns_[i];
        }
        out += '\n';
        for (const auto& row : rows_) {
            for (size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += row[i];
            }
            out += '\n';
        }
        return out;
    }

    void write(const std::string& path, std::uint64_t config_hash, std::uint64_t seed) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("CsvTable: cannot open '" + path + "'");
        out << serialize(config_hash, seed);
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace tdreg
