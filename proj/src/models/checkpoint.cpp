#include "dnagen/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dnagen/error.hpp"

namespace dnagen::models {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'N', 'A', 'G', 'E', 'N', 'C', 'K'};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint is truncated");
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw CheckpointError("checkpoint field length is implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError("checkpoint is truncated");
  return s;
}

void add_params(Checkpoint& ck, const std::string& prefix, const ParamSet& p) {
  for (std::size_t i = 0; i < p.size(); ++i) ck.entries.emplace_back(prefix + p.names()[i], p.tensors()[i]);
}

// Copies entries with the given prefix into `target`, which must already hold
// correctly named and shaped tensors.
void restore_params(const Checkpoint& ck, const std::string& prefix, ParamSet& target) {
  std::size_t next = 0;
  for (const auto& [name, t] : ck.entries) {
    if (name.rfind(prefix, 0) != 0) continue;
    if (next >= target.size())
      throw CheckpointError("checkpoint has unexpected parameter " + name);
    const std::string expect = prefix + target.names()[next];
    if (name != expect)
      throw CheckpointError("checkpoint parameter " + name + " where " + expect + " was expected");
    if (t.shape() != target.tensors()[next].shape())
      throw CheckpointError("checkpoint parameter " + name + " has shape " + ad::to_string(t.shape()) +
                            ", architecture needs " +
                            ad::to_string(target.tensors()[next].shape()));
    target.tensors()[next] = t;
    ++next;
  }
  if (next != target.size())
    throw CheckpointError("checkpoint is missing parameters with prefix " + prefix);
}

template <typename F>
auto read_spec(const nlohmann::json& j, const char* what, F&& f) {
  try {
    return f(j);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad ") + what + " descriptor: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string desc = ck.descriptor.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, desc.size());
  out.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  put<std::uint64_t>(out, fnv1a(desc));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.entries.size()));
  for (const auto& [name, t] : ck.entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint file");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported");
  const std::string desc = get_bytes(in, get<std::uint64_t>(in));
  if (get<std::uint64_t>(in) != fnv1a(desc))
    throw CheckpointError("checkpoint architecture descriptor does not match its hash");
  Checkpoint ck;
  try {
    ck.descriptor = nlohmann::json::parse(desc);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint descriptor is not valid JSON: ") + e.what());
  }
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name = get_bytes(in, get<std::uint32_t>(in));
    const auto rank = get<std::uint32_t>(in);
    if (rank > 8) throw CheckpointError("checkpoint tensor rank is implausible");
    ad::Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in);
    const std::size_t n = ad::numel(shape);
    if (n > (1ULL << 28)) throw CheckpointError("checkpoint tensor is implausibly large");
    std::vector<double> values(n);
    if (n && !in.read(reinterpret_cast<char*>(values.data()),
                      static_cast<std::streamsize>(n * sizeof(double))))
      throw CheckpointError("checkpoint is truncated");
    ck.entries.emplace_back(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw CheckpointError("checkpoint has trailing bytes");
  return ck;
}

nlohmann::json to_json(const GeneratorSpec& s) {
  return {{"latent_dim", s.latent_dim},   {"length", s.length},
          {"channels", s.channels},       {"resblocks", s.resblocks},
          {"filter_length", s.filter_length}, {"residual_scale", s.residual_scale},
          {"annotation", s.annotation}};
}

nlohmann::json to_json(const DiscriminatorSpec& s) {
  return {{"length", s.length},       {"in_channels", s.in_channels},
          {"channels", s.channels},   {"resblocks", s.resblocks},
          {"filter_length", s.filter_length}, {"residual_scale", s.residual_scale}};
}

nlohmann::json to_json(const PredictorSpec& s) {
  return {{"length", s.length}, {"filters", s.filters}, {"filter_length", s.filter_length},
          {"hidden", s.hidden}, {"leak", s.leak},       {"pad_value", s.pad_value}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  return read_spec(j, "generator", [](const nlohmann::json& v) {
    GeneratorSpec s;
    s.latent_dim = v.at("latent_dim").get<std::size_t>();
    s.length = v.at("length").get<std::size_t>();
    s.channels = v.at("channels").get<std::size_t>();
    s.resblocks = v.at("resblocks").get<std::size_t>();
    s.filter_length = v.at("filter_length").get<std::size_t>();
    s.residual_scale = v.at("residual_scale").get<double>();
    s.annotation = v.at("annotation").get<bool>();
    return s;
  });
}

DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j) {
  return read_spec(j, "discriminator", [](const nlohmann::json& v) {
    DiscriminatorSpec s;
    s.length = v.at("length").get<std::size_t>();
    s.in_channels = v.at("in_channels").get<std::size_t>();
    s.channels = v.at("channels").get<std::size_t>();
    s.resblocks = v.at("resblocks").get<std::size_t>();
    s.filter_length = v.at("filter_length").get<std::size_t>();
    s.residual_scale = v.at("residual_scale").get<double>();
    return s;
  });
}

PredictorSpec predictor_spec_from_json(const nlohmann::json& j) {
  return read_spec(j, "predictor", [](const nlohmann::json& v) {
    PredictorSpec s;
    s.length = v.at("length").get<std::size_t>();
    s.filters = v.at("filters").get<std::size_t>();
    s.filter_length = v.at("filter_length").get<std::size_t>();
    s.hidden = v.at("hidden").get<std::size_t>();
    s.leak = v.at("leak").get<double>();
    s.pad_value = v.at("pad_value").get<double>();
    return s;
  });
}

void save_gan(const Generator& gen, const Discriminator& disc, const std::filesystem::path& path) {
  Checkpoint ck;
  ck.descriptor = {{"kind", "wgan"}, {"generator", to_json(gen.spec)},
                   {"discriminator", to_json(disc.spec)}};
  add_params(ck, "G/", gen.params);
  add_params(ck, "D/", disc.params);
  save_checkpoint(ck, path);
}

GanModels load_gan(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.descriptor.value("kind", "") != "wgan")
    throw CheckpointError(path.string() + " does not hold a GAN");
  GanModels m;
  m.gen.spec = generator_spec_from_json(ck.descriptor.at("generator"));
  m.disc.spec = discriminator_spec_from_json(ck.descriptor.at("discriminator"));
  // Shapes and names come from a fresh initialization of the described
  // architecture; values are then overwritten.
  std::mt19937_64 rng(0);
  m.gen.params = init_generator(m.gen.spec, rng).params;
  m.disc.params = init_discriminator(m.disc.spec, rng).params;
  restore_params(ck, "G/", m.gen.params);
  restore_params(ck, "D/", m.disc.params);
  return m;
}

void save_predictor(const Predictor& p, const std::filesystem::path& path) {
  Checkpoint ck;
  ck.descriptor = {{"kind", "predictor"}, {"predictor", to_json(p.spec)}};
  add_params(ck, "P/", p.params);
  save_checkpoint(ck, path);
}

Predictor load_predictor(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.descriptor.value("kind", "") != "predictor")
    throw CheckpointError(path.string() + " does not hold a predictor");
  Predictor p;
  p.spec = predictor_spec_from_json(ck.descriptor.at("predictor"));
  std::mt19937_64 rng(0);
  p.params = init_predictor(p.spec, rng).params;
  restore_params(ck, "P/", p.params);
  return p;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(ss.str());
  return hex.str();
}

}  // namespace dnagen::models
