#pragma once

#include "potminer/trajectory.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace potminer {

/// Malformed record in a line-oriented artifact file. Carries path and line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what) {}
};

Dataset load_dataset(const std::string& path);
Dataset read_dataset(std::istream& in, const std::string& path_for_errors);

void save_dataset(const Dataset& dataset, const std::string& path);
void write_dataset(const Dataset& dataset, std::ostream& out);

/// Shortest decimal with at most 6 fractional digits ("1.500000" -> "1.5").
/// Round-trips exactly for values on the 1e-6 grid.
std::string format_coord(double v);

/// Snap onto the serializable 1e-6 grid (format + reparse).
double quantize_coord(double v);

}  // namespace potminer
