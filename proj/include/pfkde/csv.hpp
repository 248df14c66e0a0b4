#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pfkde {

/// Shortest decimal string that parses back to the same double.
std::string format_real(double v);

struct CsvMeta {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> params;
};

/// "# schema_version=1 seed=7 key=value ..." (no trailing newline).
std::string meta_line(const CsvMeta& meta);

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const CsvMeta& meta, std::vector<std::string> columns);

  CsvWriter& cell(double v);
  CsvWriter& cell(std::optional<double> v);  // empty cell when unset
  CsvWriter& cell(std::uint64_t v);
  CsvWriter& cell(unsigned v) { return cell(static_cast<std::uint64_t>(v)); }
  CsvWriter& cell(int v) { return text(std::to_string(v)); }
  CsvWriter& text(std::string_view v);
  CsvWriter& empty() { return text({}); }
  void end_row();

  std::size_t rows() const { return rows_; }

 private:
  void separator();

  std::ostream& os_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
  std::size_t rows_ = 0;
};

/// A group of output files written to temporaries and renamed into place on
/// commit. If the set is destroyed uncommitted, every file it touched is
/// removed.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir);
  ~OutputSet();
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  std::ostream& open(const std::string& name);
  void commit();

  const std::filesystem::path& directory() const { return dir_; }
  std::vector<std::filesystem::path> paths() const;

 private:
  struct Entry {
    std::filesystem::path final_path;
    std::filesystem::path temp_path;
    std::unique_ptr<std::ofstream> stream;
    bool renamed = false;
  };
  std::filesystem::path dir_;
  std::vector<Entry> entries_;
  bool committed_ = false;
};

}  // namespace pfkde
