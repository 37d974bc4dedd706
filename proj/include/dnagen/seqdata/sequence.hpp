#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnagen/gradcore/tensor.hpp"

namespace dnagen::seq {

inline constexpr std::array<char, 4> kBases{'A', 'C', 'G', 'T'};

// 0..3 for A, C, G, T (upper case only), -1 otherwise.
constexpr int base_index(char c) noexcept {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    case 'T': return 3;
    default: return -1;
  }
}

// Watson-Crick partner.
char complement(char base);

// A string over {A, C, G, T}. Construction validates the alphabet.
class DnaSequence {
 public:
  DnaSequence() = default;
  explicit DnaSequence(std::string_view text);

  const std::string& str() const noexcept { return text_; }
  std::size_t size() const noexcept { return text_.size(); }
  bool empty() const noexcept { return text_.empty(); }
  char operator[](std::size_t i) const { return text_[i]; }

  friend auto operator<=>(const DnaSequence&, const DnaSequence&) = default;

 private:
  std::string text_;
};

// Which channel each base occupies. The default is A, C, G, T -> 0, 1, 2, 3.
struct Encoding {
  std::array<std::size_t, 4> channel_of_base{0, 1, 2, 3};

  // order[c] is the base stored in channel c, e.g. "TGCA".
  static Encoding from_channel_order(std::string_view order);
  std::string channel_order() const;
  char base_of_channel(std::size_t channel) const;

  friend bool operator==(const Encoding&, const Encoding&) = default;
};

// [L, 4] one-hot matrix.
ad::Tensor encode_onehot(const DnaSequence& seq, const Encoding& enc = {});

// [B, L, 4]; all sequences must share one length.
ad::Tensor encode_batch(std::span<const DnaSequence> seqs, const Encoding& enc = {});

// Per-row argmax over the first four channels of an [L, C >= 4] matrix.
// Ties resolve to the lowest channel.
DnaSequence decode_argmax(const ad::Tensor& x, const Encoding& enc = {});

// Same for every item of a [B, L, C >= 4] batch.
std::vector<DnaSequence> decode_batch(const ad::Tensor& x, const Encoding& enc = {});

}  // namespace dnagen::seq
