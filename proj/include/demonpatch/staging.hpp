#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "demonpatch/errors.hpp"

namespace demonpatch {

// Collects outputs under temporary names and renames them into place only
// when commit() is reached; otherwise the temporaries are removed.
class StagedOutputs {
 public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;
  ~StagedOutputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& e : entries_) std::filesystem::remove_all(e.temp, ec);
  }

  // Returns the temporary path to write instead of `final_path`.
  std::filesystem::path stage(const std::filesystem::path& final_path) {
    if (final_path.has_parent_path() && !final_path.parent_path().empty()) {
      std::error_code ec;
      std::filesystem::create_directories(final_path.parent_path(), ec);
      if (ec) throw IoError("cannot create directory '" + final_path.parent_path().string() + "'");
    }
    auto temp = final_path;
    temp += ".partial";
    entries_.push_back({temp, final_path});
    return temp;
  }

  void commit() {
    for (const auto& e : entries_) {
      std::error_code ec;
      if (std::filesystem::is_directory(e.target)) std::filesystem::remove_all(e.target, ec);
      std::filesystem::rename(e.temp, e.target, ec);
      if (ec) throw IoError("cannot move output into place: '" + e.target.string() + "'");
    }
    committed_ = true;
  }

 private:
  struct Entry {
    std::filesystem::path temp;
    std::filesystem::path target;
  };
  std::vector<Entry> entries_;
  bool committed_ = false;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw IoError("cannot write '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace demonpatch
