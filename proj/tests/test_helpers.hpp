#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "al/corpus.hpp"

namespace al::test {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(AL_TEST_DATA_DIR) / name; }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device device;
    path_ = std::filesystem::temp_directory_path() / ("al-" + tag + "-" + std::to_string(device()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Dataset whose labels follow `labels`, with texts "doc<i>".
inline Dataset labeled_dataset(const std::vector<std::size_t>& labels, std::size_t num_classes) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < num_classes; ++k) names.push_back("c" + std::to_string(k));
  std::vector<Instance> xs;
  for (std::size_t i = 0; i < labels.size(); ++i) xs.push_back({i, i, "doc" + std::to_string(i), labels[i]});
  return Dataset(LabelSchema(names), std::move(xs));
}

}  // namespace al::test
