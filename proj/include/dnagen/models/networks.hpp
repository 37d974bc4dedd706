#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dnagen/gradcore/graph.hpp"

namespace dnagen::models {

// Ordered, named parameter tensors.
class ParamSet {
 public:
  void add(std::string name, ad::Tensor value);

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::vector<ad::Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<ad::Tensor>& tensors() const noexcept { return tensors_; }
  const ad::Tensor& at(std::string_view name) const;

  // FNV-1a over names, shapes and value bytes.
  std::uint64_t fingerprint() const;
  std::size_t scalar_count() const;

  // Leaves in the given graph, in parameter order.
  std::vector<ad::Var> bind(ad::Graph& g) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> tensors_;
};

struct GeneratorSpec {
  std::size_t latent_dim = 100;
  std::size_t length = 50;
  std::size_t channels = 64;
  std::size_t resblocks = 5;
  std::size_t filter_length = 5;
  double residual_scale = 0.3;
  bool annotation = false;  // adds a sigmoid annotation channel after the 4 bases

  std::size_t out_channels() const { return annotation ? 5 : 4; }
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct DiscriminatorSpec {
  std::size_t length = 50;
  std::size_t in_channels = 4;
  std::size_t channels = 64;
  std::size_t resblocks = 5;
  std::size_t filter_length = 5;
  double residual_scale = 0.3;
  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

struct PredictorSpec {
  std::size_t length = 36;
  std::size_t filters = 16;
  std::size_t filter_length = 12;
  std::size_t hidden = 32;
  double leak = 0.1;
  double pad_value = 0.25;
  friend bool operator==(const PredictorSpec&, const PredictorSpec&) = default;
};

struct Generator {
  GeneratorSpec spec;
  ParamSet params;
};

struct Discriminator {
  DiscriminatorSpec spec;
  ParamSet params;
};

struct Predictor {
  PredictorSpec spec;
  ParamSet params;
};

// Glorot-uniform weights, zero biases.
Generator init_generator(const GeneratorSpec& spec, std::mt19937_64& rng);
Discriminator init_discriminator(const DiscriminatorSpec& spec, std::mt19937_64& rng);
Predictor init_predictor(const PredictorSpec& spec, std::mt19937_64& rng);

// linear -> reshape [L, C] -> resblocks -> 1-wide conv -> softmax over the base
// channels (plus sigmoid annotation channel). z: [D_z] -> [L, C_out] or
// [B, D_z] -> [B, L, C_out].
ad::Var generator_forward(const GeneratorSpec& spec, std::span<const ad::Var> params, ad::Var z);

// conv -> resblocks -> flatten -> linear. x: [L, C] -> scalar, [B, L, C] -> [B].
ad::Var discriminator_forward(const DiscriminatorSpec& spec, std::span<const ad::Var> params,
                              ad::Var x);

// Flank-padded conv -> leaky relu -> max/mean pool -> linear -> leaky relu ->
// linear -> sigmoid. x: [L, 4] -> scalar, [B, L, 4] -> [B].
ad::Var predictor_forward(const PredictorSpec& spec, std::span<const ad::Var> params, ad::Var x);

// Inference helpers on plain tensors.
ad::Tensor generate(const Generator& g, const ad::Tensor& z);
ad::Tensor predict(const Predictor& p, const ad::Tensor& x);

}  // namespace dnagen::models
