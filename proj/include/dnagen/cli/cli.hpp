#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dnagen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // unexpected internal error
inline constexpr int kExitConfig = 2;    // bad flags, config keys, paths or checkpoints
inline constexpr int kExitTraining = 3;  // training diverged, or every design restart failed

// INI-style experiment configuration. Top-level keys (before any section) and
// sections [data] [model] [train] [design] [eval]; unknown sections or keys are
// rejected at parse time. Every value read through the accessors, defaults
// included, is recorded for the resolved config written next to the outputs.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "config");
  static Config parse_text(const std::string& text, const std::string& origin = "config");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> maybe(const std::string& section, const std::string& key);
  std::string require(const std::string& section, const std::string& key);
  std::string text(const std::string& section, const std::string& key, const std::string& fallback);
  std::size_t count(const std::string& section, const std::string& key, std::size_t fallback);
  double real(const std::string& section, const std::string& key, double fallback);
  bool flag(const std::string& section, const std::string& key, bool fallback);
  std::uint64_t seed();

  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string resolved() const;
  const std::string& source_text() const noexcept { return source_; }

 private:
  void record(const std::string& section, const std::string& key, const std::string& value);

  std::map<std::string, std::map<std::string, std::string>> values_;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> resolved_;
  std::string source_;
  std::string origin_;
};

// Deterministic sub-seed for one named consumer of the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Entry point shared by the executable and the tests. args excludes the
// program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dnagen::cli
