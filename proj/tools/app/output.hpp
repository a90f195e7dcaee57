#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "app/config.hpp"

namespace app {

using Cell = std::variant<double, std::int64_t, std::string>;
using Row = std::vector<Cell>;

struct Dataset {
    json header;
    std::vector<std::string> columns;
    std::vector<Row> rows;
};

inline constexpr const char* kToolVersion = "rabi 1.0.0";

// Shortest round-trip text for a double; "nan"/"inf"/"-inf" otherwise.
std::string format_number(double v);

void write_csv(std::ostream& os, const Dataset& d);
void write_json(std::ostream& os, const Dataset& d);
// Writes to `path`, or stdout when path is empty or "-".
void write_dataset(const Dataset& d, const std::string& path, const std::string& format);

}  // namespace app
