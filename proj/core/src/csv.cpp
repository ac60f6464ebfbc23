#include "emlab/csv.hpp"

#include <charconv>

#include "emlab/error.hpp"

namespace emlab {

std::string FormatDouble(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& file) : out_(file) {
  if (!out_) throw InvalidArgument("cannot open " + file.string() + " for writing");
}

void CsvWriter::Header(const std::vector<std::string>& columns) {
  Begin();
  for (const auto& c : columns) Field(std::string_view(c));
  End();
}

void CsvWriter::Begin() { first_ = true; }

void CsvWriter::Separator() {
  if (!first_) out_ << ',';
  first_ = false;
}

void CsvWriter::Field(double value) {
  Separator();
  out_ << FormatDouble(value);
}

void CsvWriter::Field(std::int64_t value) {
  Separator();
  out_ << value;
}

void CsvWriter::Field(std::string_view value) {
  Separator();
  out_ << value;
}

void CsvWriter::Empty() { Separator(); }

void CsvWriter::End() { out_ << '\n'; }

}  // namespace emlab
