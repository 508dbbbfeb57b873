#pragma once

// CSV emission/ingestion shared by the CLI and tests.  Every emitted file
// starts with '#'-prefixed header lines carrying at least the seed and the
// config hash, then a column-name row; floats print with 10 significant
// digits.  Readers skip '#' lines.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace psmrwm {

/// FNV-1a 64-bit hash of a string (config fingerprinting), as fixed-width hex.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
  }

  void comment(const std::string& line) { out_ << "# " << line << "\n"; }

  void header(const std::string& columns) { out_ << columns << "\n"; }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ",";
      out_ << format_double(values[i]);
    }
    out_ << "\n";
  }

  void raw_row(const std::string& line) { out_ << line << "\n"; }

 private:
  std::ofstream out_;
};

/// Reads a numeric CSV (any column count), skipping '#' comments and an
/// optional non-numeric header row.
inline std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv_rows: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool seen_data = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (!seen_data) continue;  // header row
      throw std::runtime_error("read_csv_rows: malformed line in " + path + ": " + line);
    }
    if (!row.empty()) {
      rows.push_back(std::move(row));
      seen_data = true;
    }
  }
  return rows;
}

}  // namespace psmrwm
