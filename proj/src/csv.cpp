#include "pfkde/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <system_error>

namespace pfkde {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf.data(), ptr);
}

namespace {

std::string sanitize(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c == '\n' || c == '\r' || c == ',') c = ' ';
  return out;
}

}  // namespace

std::string meta_line(const CsvMeta& meta) {
  std::string s = "# schema_version=" + std::to_string(meta.schema_version) +
                  " seed=" + std::to_string(meta.seed);
  for (const auto& [k, v] : meta.params) {
    std::string value = sanitize(v);
    for (auto& c : value)
      if (c == ' ') c = ';';
    s += ' ' + sanitize(k) + '=' + value;
  }
  return s;
}

CsvWriter::CsvWriter(std::ostream& os, const CsvMeta& meta, std::vector<std::string> columns)
    : os_(os), columns_(columns.size()) {
  if (columns.empty()) throw std::invalid_argument("CsvWriter: no columns");
  os_ << meta_line(meta) << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) os_ << ',';
    os_ << sanitize(columns[i]);
  }
  os_ << '\n';
}

void CsvWriter::separator() {
  if (in_row_ == columns_) throw std::logic_error("CsvWriter: too many cells in row");
  if (in_row_ > 0) os_ << ',';
  ++in_row_;
}

CsvWriter& CsvWriter::cell(double v) {
  separator();
  os_ << format_real(v);
  return *this;
}

CsvWriter& CsvWriter::cell(std::optional<double> v) {
  separator();
  if (v) os_ << format_real(*v);
  return *this;
}

CsvWriter& CsvWriter::cell(std::uint64_t v) {
  separator();
  os_ << v;
  return *this;
}

CsvWriter& CsvWriter::text(std::string_view v) {
  separator();
  os_ << sanitize(v);
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) {
    throw std::logic_error("CsvWriter: row has " + std::to_string(in_row_) + " cells, expected " +
                           std::to_string(columns_));
  }
  os_ << '\n';
  in_row_ = 0;
  ++rows_;
}

OutputSet::OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

OutputSet::~OutputSet() {
  if (committed_) return;
  std::error_code ec;
  for (auto& e : entries_) {
    e.stream.reset();
    std::filesystem::remove(e.temp_path, ec);
    if (e.renamed) std::filesystem::remove(e.final_path, ec);
  }
}

std::ostream& OutputSet::open(const std::string& name) {
  if (committed_) throw std::logic_error("OutputSet: already committed");
  std::filesystem::create_directories(dir_);
  Entry e;
  e.final_path = dir_ / name;
  e.temp_path = dir_ / (name + ".partial");
  for (const auto& other : entries_)
    if (other.final_path == e.final_path) throw std::invalid_argument("OutputSet: duplicate output " + name);
  e.stream = std::make_unique<std::ofstream>(e.temp_path, std::ios::binary | std::ios::trunc);
  if (!*e.stream) throw std::runtime_error("cannot open output file: " + e.temp_path.string());
  entries_.push_back(std::move(e));
  return *entries_.back().stream;
}

void OutputSet::commit() {
  for (auto& e : entries_) {
    e.stream->flush();
    if (!*e.stream) throw std::runtime_error("write failed: " + e.temp_path.string());
    e.stream->close();
  }
  for (auto& e : entries_) {
    std::filesystem::rename(e.temp_path, e.final_path);
    e.renamed = true;
  }
  committed_ = true;
}

std::vector<std::filesystem::path> OutputSet::paths() const {
  std::vector<std::filesystem::path> out;
  for (const auto& e : entries_) out.push_back(e.final_path);
  return out;
}

}  // namespace pfkde
