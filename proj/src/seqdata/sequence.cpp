#include "dnagen/seqdata/sequence.hpp"

#include <algorithm>

#include "dnagen/error.hpp"

namespace dnagen::seq {

char complement(char base) {
  switch (base) {
    case 'A': return 'T';
    case 'C': return 'G';
    case 'G': return 'C';
    case 'T': return 'A';
    default: throw EncodingError(std::string("no complement for '") + base + "'");
  }
}

DnaSequence::DnaSequence(std::string_view text) : text_(text) {
  for (std::size_t i = 0; i < text_.size(); ++i) {
    if (base_index(text_[i]) < 0) {
      throw EncodingError("invalid nucleotide '" + std::string(1, text_[i]) + "' at position " +
                          std::to_string(i));
    }
  }
}

Encoding Encoding::from_channel_order(std::string_view order) {
  if (order.size() != 4) throw EncodingError("channel order must list 4 bases");
  Encoding e;
  std::array<bool, 4> seen{};
  for (std::size_t c = 0; c < 4; ++c) {
    const int b = base_index(order[c]);
    if (b < 0 || seen[static_cast<std::size_t>(b)])
      throw EncodingError("channel order '" + std::string(order) + "' is not a permutation of ACGT");
    seen[static_cast<std::size_t>(b)] = true;
    e.channel_of_base[static_cast<std::size_t>(b)] = c;
  }
  return e;
}

std::string Encoding::channel_order() const {
  std::string s(4, '?');
  for (std::size_t b = 0; b < 4; ++b) s[channel_of_base[b]] = kBases[b];
  return s;
}

char Encoding::base_of_channel(std::size_t channel) const {
  for (std::size_t b = 0; b < 4; ++b)
    if (channel_of_base[b] == channel) return kBases[b];
  throw EncodingError("channel " + std::to_string(channel) + " out of range");
}

ad::Tensor encode_onehot(const DnaSequence& seq, const Encoding& enc) {
  ad::Tensor x({seq.size(), 4});
  for (std::size_t i = 0; i < seq.size(); ++i) {
    x.at(i, enc.channel_of_base[static_cast<std::size_t>(base_index(seq[i]))]) = 1.0;
  }
  return x;
}

ad::Tensor encode_batch(std::span<const DnaSequence> seqs, const Encoding& enc) {
  const std::size_t l = seqs.empty() ? 0 : seqs.front().size();
  ad::Tensor x({seqs.size(), l, 4});
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    if (seqs[b].size() != l) throw DimensionError("encode_batch: sequences differ in length");
    for (std::size_t i = 0; i < l; ++i) {
      x.at(b, i, enc.channel_of_base[static_cast<std::size_t>(base_index(seqs[b][i]))]) = 1.0;
    }
  }
  return x;
}

namespace {

std::string decode_rows(std::span<const double> data, std::size_t rows, std::size_t channels,
                        const Encoding& enc) {
  std::string s(rows, 'A');
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = data.data() + i * channels;
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c)
      if (row[c] > row[best]) best = c;
    s[i] = enc.base_of_channel(best);
  }
  return s;
}

}  // namespace

DnaSequence decode_argmax(const ad::Tensor& x, const Encoding& enc) {
  if (x.rank() != 2 || x.dim(1) < 4)
    throw DimensionError("decode_argmax needs [L, C>=4], got " + ad::to_string(x.shape()));
  return DnaSequence(decode_rows(x.data(), x.dim(0), x.dim(1), enc));
}

std::vector<DnaSequence> decode_batch(const ad::Tensor& x, const Encoding& enc) {
  if (x.rank() != 3 || x.dim(2) < 4)
    throw DimensionError("decode_batch needs [B, L, C>=4], got " + ad::to_string(x.shape()));
  const std::size_t l = x.dim(1), c = x.dim(2);
  std::vector<DnaSequence> out;
  out.reserve(x.dim(0));
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    out.emplace_back(decode_rows(x.data().subspan(b * l * c, l * c), l, c, enc));
  }
  return out;
}

}  // namespace dnagen::seq
