#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cslab/algebra.hpp"

namespace cslab {

/// JSON layout: block name -> nested numeric arrays, complex entries as
/// [re, im] pairs; grid and csco sections embedded so files are standalone.
std::string observable_to_json(const Observable& obs);
std::string state_to_json(const StateFunctional& rho);
Observable observable_from_json(const std::string& text);
StateFunctional state_from_json(const std::string& text);

/// CSV with '.' decimal point, ',' separator, mandatory header row, and a
/// leading '#' comment line carrying scenario name and seed.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::string& comment,
              const std::vector<std::string>& columns);
    void row(const std::vector<double>& values);
    void raw_row(const std::vector<std::string>& cells);

  private:
    std::ofstream out_;
};

std::string format_double(double v);

/// Diagonal profile export with columns omega, m, value.
void write_diagonal_csv(const std::filesystem::path& path, const std::string& comment,
                        const FiveBlocks& x);

void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_binary_doubles(const std::filesystem::path& path, const double* data,
                          std::size_t count);

}  // namespace cslab
