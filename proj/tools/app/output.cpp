#include "app/output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>

namespace app {
namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return csv_escape(std::get<std::string>(c));
}

json cell_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(nullptr);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
    return std::get<std::string>(c);
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0 as well
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const Dataset& d) {
    os << "# " << d.header.dump() << '\n';
    for (std::size_t i = 0; i < d.columns.size(); ++i) os << (i ? "," : "") << d.columns[i];
    os << '\n';
    for (const Row& r : d.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_text(r[i]);
        os << '\n';
    }
}

void write_json(std::ostream& os, const Dataset& d) {
    json doc;
    doc["header"] = d.header;
    doc["columns"] = d.columns;
    json rows = json::array();
    for (const Row& r : d.rows) {
        json jr = json::array();
        for (const Cell& c : r) jr.push_back(cell_json(c));
        rows.push_back(std::move(jr));
    }
    doc["rows"] = std::move(rows);
    os << doc.dump(1) << '\n';
}

void write_dataset(const Dataset& d, const std::string& path, const std::string& format) {
    auto emit = [&](std::ostream& os) {
        if (format == "json")
            write_json(os, d);
        else
            write_csv(os, d);
    };
    if (path.empty() || path == "-") {
        emit(std::cout);
        std::cout.flush();
        return;
    }
    // Write then rename so an interrupted run never leaves a truncated dataset.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open output file '" + path + "'");
        emit(out);
        if (!out) throw std::runtime_error("failed writing '" + path + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move output into place at '" + path + "'");
}

}  // namespace app
