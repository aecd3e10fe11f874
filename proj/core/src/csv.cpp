#include "cipt/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

namespace cipt {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

// One categorical column: integer tokens are taken as labels as-is, any other
// token set is mapped through a sorted dictionary.
std::vector<double> encode_categorical(const std::vector<std::string>& raw, const char* name,
                                       int& cardinality) {
    bool all_integer = true;
    for (const auto& tok : raw) {
        double v = 0.0;
        if (!parse_double(tok, v) || v != std::floor(v) || v < 1.0) {
            all_integer = false;
            break;
        }
    }
    std::vector<double> col;
    col.reserve(raw.size());
    int max_label = 0;
    if (all_integer) {
        for (const auto& tok : raw) {
            double v = 0.0;
            parse_double(tok, v);
            col.push_back(v);
            max_label = std::max(max_label, static_cast<int>(v));
        }
    } else {
        std::map<std::string, int> dict;
        for (const auto& tok : raw) dict.emplace(tok, 0);
        int next = 1;
        for (auto& [tok, label] : dict) label = next++;
        for (const auto& tok : raw) col.push_back(static_cast<double>(dict.at(tok)));
        max_label = static_cast<int>(dict.size());
    }
    if (max_label < 2) {
        throw DataError(std::string(name) + ": needs at least 2 distinct categories");
    }
    cardinality = max_label;
    return col;
}

std::vector<double> parse_real_column(const std::vector<std::string>& raw, const char* name) {
    std::vector<double> col;
    col.reserve(raw.size());
    for (const auto& tok : raw) {
        double v = 0.0;
        if (!parse_double(tok, v)) {
            throw DataError(std::string(name) + ": cannot parse '" + tok + "' as a number");
        }
        col.push_back(v);
    }
    return col;
}

}  // namespace

Dataset load_dataset_csv(std::istream& in, AxisKind x_kind, AxisKind y_kind, ZKind z_kind) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input");
    auto header = split_line(line);
    if (header.size() != 3 || header[0] != "x" || header[1] != "y" || header[2] != "z") {
        throw DataError("expected header 'x,y,z'");
    }

    std::vector<std::string> xs, ys, zs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != 3) {
            throw DataError("line " + std::to_string(lineno) + ": expected 3 fields");
        }
        xs.push_back(fields[0]);
        ys.push_back(fields[1]);
        zs.push_back(fields[2]);
    }

    Dataset ds;
    ds.z_kind = z_kind;
    if (x_kind == AxisKind::categorical) {
        int card = 0;
        ds.x = encode_categorical(xs, "x", card);
        ds.x_spec = AxisSpec::categorical(card);
    } else {
        ds.x = parse_real_column(xs, "x");
        ds.x_spec = AxisSpec::real();
    }
    if (y_kind == AxisKind::categorical) {
        int card = 0;
        ds.y = encode_categorical(ys, "y", card);
        ds.y_spec = AxisSpec::categorical(card);
    } else {
        ds.y = parse_real_column(ys, "y");
        ds.y_spec = AxisSpec::real();
    }
    if (z_kind == ZKind::categorical) {
        int card = 0;
        ds.z = encode_categorical(zs, "z", card);
    } else {
        ds.z = parse_real_column(zs, "z");
    }
    return ds;
}

Dataset load_dataset_csv(const std::string& path, AxisKind x_kind, AxisKind y_kind, ZKind z_kind) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return load_dataset_csv(in, x_kind, y_kind, z_kind);
}

void save_dataset_csv(std::ostream& out, const Dataset& ds) {
    out << "x,y,z\n";
    std::ostringstream row;
    row.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        row.str("");
        row << ds.x[i] << ',' << ds.y[i] << ',' << ds.z[i] << '\n';
        out << row.str();
    }
}

}  // namespace cipt
