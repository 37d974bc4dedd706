#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dnagen/cli/cli.hpp"
#include "dnagen/error.hpp"

namespace dnagen::cli {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"seed"}},
      {"data",
       {"source", "path", "window", "count", "length", "motif", "motif_file", "planting_prob",
        "min_exon", "max_exon", "start_motif", "start_anchor", "percentile", "oracle",
        "oracle_motifs", "oracle_motif_length", "oracle_related", "oracle_shared"}},
      {"model",
       {"latent_dim", "channels", "resblocks", "filter_length", "residual_scale", "pred_filters",
        "pred_filter_length", "pred_hidden", "pred_leak"}},
      {"train",
       {"batch", "steps", "critic_steps", "lambda", "lr", "beta1", "beta2", "snapshot_every",
        "snapshot_samples", "epochs", "progress_every"}},
      {"design",
       {"mode", "generator", "terms", "length", "restarts", "max_steps", "step_size",
        "prior_weight", "noise_std", "beta1", "beta2", "plain_steps", "tolerance", "patience",
        "score_oracle", "reference", "reference_percentile", "motif", "motif_fraction",
        "hist_bin"}},
      {"eval",
       {"generator", "steps", "target", "target_base", "points", "max_steps", "step_size",
        "match_threshold", "queries", "reference", "holdout", "include_self", "samples", "input",
        "window", "flank", "threshold", "channel_orders"}},
  };
  return keys;
}

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : "[" + section + "] " + key;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& origin) {
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), origin);
}

Config Config::parse_text(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  Config c;
  c.source_ = text;
  c.origin_ = origin;
  const auto& keys = schema();
  auto add = [&](const std::string& section, const std::string& key, const std::string& value) {
    const auto& allowed = keys.at(section);
    if (!allowed.count(key)) throw ConfigError(origin + ": unknown key " + where(section, key));
    c.values_[section][key] = value;
    c.record(section, key, value);
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (!name.empty() && keys.count(name) && node.data().empty()) continue;  // empty section
      add("", name, node.data());
      continue;
    }
    if (!keys.count(name) || name.empty()) throw ConfigError(origin + ": unknown section [" + name + "]");
    for (const auto& [key, leaf] : node) add(name, key, leaf.data());
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse(in, path.string());
}

void Config::record(const std::string& section, const std::string& key, const std::string& value) {
  auto sec = std::find_if(resolved_.begin(), resolved_.end(),
                          [&](const auto& s) { return s.first == section; });
  if (sec == resolved_.end()) {
    resolved_.push_back({section, {}});
    sec = std::prev(resolved_.end());
  }
  auto kv = std::find_if(sec->second.begin(), sec->second.end(),
                         [&](const auto& p) { return p.first == key; });
  if (kv == sec->second.end())
    sec->second.emplace_back(key, value);
  else
    kv->second = value;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = values_.find(section);
  return it != values_.end() && it->second.count(key);
}

std::optional<std::string> Config::maybe(const std::string& section, const std::string& key) {
  if (!schema().at(section).count(key))
    throw std::logic_error("config key not in schema: " + where(section, key));
  if (!has(section, key)) return std::nullopt;
  return values_.at(section).at(key);
}

std::string Config::require(const std::string& section, const std::string& key) {
  auto v = maybe(section, key);
  if (!v || v->empty()) throw ConfigError(origin_ + ": missing required key " + where(section, key));
  return *v;
}

std::string Config::text(const std::string& section, const std::string& key,
                         const std::string& fallback) {
  auto v = maybe(section, key);
  if (!v) {
    record(section, key, fallback);
    return fallback;
  }
  return *v;
}

std::size_t Config::count(const std::string& section, const std::string& key, std::size_t fallback) {
  auto v = maybe(section, key);
  if (!v) {
    record(section, key, std::to_string(fallback));
    return fallback;
  }
  std::size_t out = 0;
  const auto* end = v->data() + v->size();
  const auto [p, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError(origin_ + ": " + where(section, key) + " expects a non-negative integer, got '" + *v + "'");
  return out;
}

double Config::real(const std::string& section, const std::string& key, double fallback) {
  auto v = maybe(section, key);
  if (!v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, fallback);
    record(section, key, std::string(buf, r.ptr));
    return fallback;
  }
  double out = 0.0;
  const auto* end = v->data() + v->size();
  const auto [p, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError(origin_ + ": " + where(section, key) + " expects a number, got '" + *v + "'");
  return out;
}

bool Config::flag(const std::string& section, const std::string& key, bool fallback) {
  auto v = maybe(section, key);
  if (!v) {
    record(section, key, fallback ? "true" : "false");
    return fallback;
  }
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  throw ConfigError(origin_ + ": " + where(section, key) + " expects true or false, got '" + *v + "'");
}

std::uint64_t Config::seed() {
  auto v = maybe("", "seed");
  if (!v) {
    record("", "seed", "1");
    return 1;
  }
  std::uint64_t out = 0;
  const auto* end = v->data() + v->size();
  const auto [p, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError(origin_ + ": seed expects a non-negative integer, got '" + *v + "'");
  return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  if (!schema().count(section) || !schema().at(section).count(key))
    throw ConfigError("unknown key " + where(section, key));
  values_[section][key] = value;
  record(section, key, value);
}

std::string Config::resolved() const {
  std::ostringstream out;
  static const std::vector<std::string> order{"", "data", "model", "train", "design", "eval"};
  bool first = true;
  for (const auto& name : order) {
    const auto sec = std::find_if(resolved_.begin(), resolved_.end(),
                                  [&](const auto& s) { return s.first == name; });
    if (sec == resolved_.end()) continue;
    if (!name.empty()) out << (first ? "" : "\n") << '[' << name << "]\n";
    for (const auto& [k, v] : sec->second) out << k << " = " << v << '\n';
    first = false;
  }
  return out.str();
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer
  std::uint64_t z = root ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dnagen::cli
