#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace coplay::io {

using Json = nlohmann::ordered_json;

/// Raised for malformed input files; carries the offending record number.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& source, std::size_t record, const std::string& what)
      : std::runtime_error(source + ": record " + std::to_string(record) + ": " + what),
        record_(record) {}
  [[nodiscard]] std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

inline void write_jsonl(std::ostream& os, const Json& record) { os << record.dump() << '\n'; }

/// Parses one JSON value per non-empty line. Records are numbered from 1.
inline std::vector<Json> read_jsonl(std::istream& is, const std::string& source = "<stream>") {
  std::vector<Json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(source, n, std::string("invalid JSON: ") + e.what());
    }
  }
  return out;
}

inline std::vector<Json> read_jsonl_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path, 0, "cannot open file");
  return read_jsonl(is, path);
}

/// Appending line-delimited log file.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const std::string& path, bool append = true)
      : os_(path, append ? std::ios::app : std::ios::trunc) {
    if (!os_) throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  void write(const Json& record) {
    if (os_.is_open()) {
      write_jsonl(os_, record);
      os_.flush();
    }
  }
  [[nodiscard]] bool is_open() const { return os_.is_open(); }

 private:
  std::ofstream os_;
};

}  // namespace coplay::io
