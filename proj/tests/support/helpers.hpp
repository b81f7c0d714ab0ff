#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "conex/conex.hpp"

namespace testing_support {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("conex-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline conex::EntityRecord word_record(const std::string& id, const std::string& name, const std::string& text,
                                       std::vector<std::string> gold = {}) {
  return conex::make_record(id, name, text, conex::LanguageMode::kWord, std::move(gold));
}

/// Profile with every probability at `base`, then overrides.
inline conex::ProbabilityProfile flat_profile(std::size_t n, double base) {
  return {std::vector<double>(n, base), std::vector<double>(n, base)};
}

inline conex::ProbabilityProfile random_profile(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  conex::ProbabilityProfile p;
  for (std::size_t k = 0; k < n; ++k) {
    p.p_start.push_back(u(gen));
    p.p_end.push_back(u(gen));
  }
  return p;
}

/// "t0 t1 ... t(n-1)".
inline conex::EntityRecord numbered_record(std::size_t n) {
  std::string text;
  for (std::size_t k = 0; k < n; ++k) text += (k ? " t" : "t") + std::to_string(k);
  return word_record("e", "E", text);
}

}  // namespace testing_support
