#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace emlab {

// Minimal CSV writer. Doubles are written in shortest round-trip form so
// output is byte-stable across runs.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& file);

  void Header(const std::vector<std::string>& columns);
  void Begin();
  void Field(double value);
  void Field(std::int64_t value);
  void Field(std::string_view value);
  void Empty();
  void End();

 private:
  void Separator();
  std::ofstream out_;
  bool first_ = true;
};

std::string FormatDouble(double value);

}  // namespace emlab
