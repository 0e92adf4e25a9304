#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "surnn/error.hpp"

namespace surnn::cli {

// Collects output files under temporary names and moves them into place
// only when commit() is called, so a failed run leaves nothing behind.
class StagedOutputs {
 public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;

  ~StagedOutputs() {
    if (committed_) return;
    std::error_code ec;
    for (auto& f : files_) {
      f.stream.reset();
      std::filesystem::remove(f.temp, ec);
    }
    for (auto it = created_dirs_.rbegin(); it != created_dirs_.rend(); ++it) {
      if (std::filesystem::is_empty(*it, ec)) std::filesystem::remove(*it, ec);
    }
  }

  std::ostream& open(const std::filesystem::path& target) {
    make_parent(target);
    File f;
    f.target = target;
    f.temp = target;
    f.temp += ".partial";
    f.stream = std::make_unique<std::ofstream>(f.temp, std::ios::binary);
    if (!*f.stream) throw FormatError("cannot write file", f.temp.string());
    files_.push_back(std::move(f));
    return *files_.back().stream;
  }

  void commit() {
    for (auto& f : files_) {
      f.stream->flush();
      if (!*f.stream) throw FormatError("write failed", f.temp.string());
      f.stream.reset();
    }
    for (auto& f : files_) std::filesystem::rename(f.temp, f.target);
    committed_ = true;
  }

 private:
  struct File {
    std::filesystem::path target, temp;
    std::unique_ptr<std::ofstream> stream;
  };

  void make_parent(const std::filesystem::path& target) {
    auto dir = target.parent_path();
    if (dir.empty()) return;
    std::vector<std::filesystem::path> missing;
    for (auto d = dir; !d.empty() && !std::filesystem::exists(d); d = d.parent_path()) {
      missing.push_back(d);
      if (d == d.parent_path()) break;
    }
    std::filesystem::create_directories(dir);
    for (auto it = missing.rbegin(); it != missing.rend(); ++it) created_dirs_.push_back(*it);
  }

  std::vector<File> files_;
  std::vector<std::filesystem::path> created_dirs_;
  bool committed_ = false;
};

}  // namespace surnn::cli
