#include "dtree/stopset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "dtree/errors.hpp"

namespace dtree {

namespace {

void put_u32(std::uint8_t* out, std::uint32_t v) {
  out[0] = static_cast<std::uint8_t>(v >> 24);
  out[1] = static_cast<std::uint8_t>(v >> 16);
  out[2] = static_cast<std::uint8_t>(v >> 8);
  out[3] = static_cast<std::uint8_t>(v);
}

std::uint8_t reverse_bits(std::uint8_t v) {
  v = static_cast<std::uint8_t>((v & 0xF0u) >> 4 | (v & 0x0Fu) << 4);
  v = static_cast<std::uint8_t>((v & 0xCCu) >> 2 | (v & 0x33u) << 2);
  v = static_cast<std::uint8_t>((v & 0xAAu) >> 1 | (v & 0x55u) << 1);
  return v;
}

std::uint32_t get_u32(const std::uint8_t* in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

}  // namespace

PairKey make_key(Address iface, Address dest, int prefix_len) {
  return {iface, dest.masked(prefix_len)};
}

std::array<std::uint8_t, 8> key_bytes(PairKey key) {
  std::array<std::uint8_t, 8> out{};
  put_u32(out.data(), key.iface.value);
  put_u32(out.data() + 4, key.dest_key.value);
  return out;
}

// ---------------------------------------------------------------------------

bool LocalStopSet::insert(Address a) {
  std::unique_lock lock(mutex_);
  return interfaces_.insert(a).second;
}

bool LocalStopSet::contains(Address a) const {
  std::shared_lock lock(mutex_);
  return interfaces_.contains(a);
}

std::size_t LocalStopSet::size() const {
  std::shared_lock lock(mutex_);
  return interfaces_.size();
}

// ---------------------------------------------------------------------------

std::vector<std::uint32_t> bloom_positions(PairKey key, std::uint32_t m,
                                           int k) {
  if (m == 0) throw std::invalid_argument("Bloom filter needs m >= 1");
  if (k < 1 || k > BloomFilter::kMaxHashes) {
    throw std::invalid_argument("one SHA-1 digest yields 1 to 5 positions");
  }
  const auto bytes = key_bytes(key);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &digest_len, EVP_sha1(),
                 nullptr) != 1 ||
      digest_len != 20) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::vector<std::uint32_t> positions(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    positions[static_cast<std::size_t>(i)] = get_u32(digest + 4 * i) % m;
  }
  return positions;
}

BloomFilter::BloomFilter(std::uint32_t m, int k)
    : m_(m), k_(k), words_((std::uint64_t{m} + 63) / 64, 0) {
  if (m == 0) throw std::invalid_argument("Bloom filter needs m >= 1");
  if (k < 1 || k > kMaxHashes) {
    throw std::invalid_argument("Bloom filter hash count must be 1..5");
  }
}

void BloomFilter::set_bit(std::uint32_t i) {
  words_[i / 64] |= std::uint64_t{1} << (i % 64);
}

bool BloomFilter::test_bit(std::uint32_t i) const {
  return (words_[i / 64] >> (i % 64)) & 1u;
}

void BloomFilter::insert(PairKey key) {
  for (std::uint32_t pos : bloom_positions(key, m_, k_)) set_bit(pos);
  ++inserted_;
}

bool BloomFilter::contains(PairKey key) const {
  for (std::uint32_t pos : bloom_positions(key, m_, k_)) {
    if (!test_bit(pos)) return false;
  }
  return true;
}

void BloomFilter::merge(const BloomFilter& other) {
  if (other.m_ != m_ || other.k_ != k_) {
    throw std::invalid_argument("cannot merge Bloom filters of different shape");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
}

std::uint64_t BloomFilter::popcount() const {
  std::uint64_t n = 0;
  for (std::uint64_t w : words_) n += static_cast<std::uint64_t>(std::popcount(w));
  return n;
}

std::vector<std::uint8_t> BloomFilter::to_bytes() const {
  const std::size_t nbytes = (std::size_t{m_} + 7) / 8;
  std::vector<std::uint8_t> out(8 + nbytes, 0);
  put_u32(out.data(), m_);
  put_u32(out.data() + 4, static_cast<std::uint32_t>(k_));
  // Internal words are LSB-first; the wire wants MSB-first within a byte.
  for (std::size_t j = 0; j < nbytes; ++j) {
    const auto raw = static_cast<std::uint8_t>(words_[j / 8] >> ((j % 8) * 8));
    out[8 + j] = reverse_bits(raw);
  }
  return out;
}

BloomFilter BloomFilter::from_bytes(std::span<const std::uint8_t> b) {
  if (b.size() < 8) throw WireError("Bloom descriptor truncated", b.size());
  const std::uint32_t m = get_u32(b.data());
  const std::uint32_t k = get_u32(b.data() + 4);
  if (m == 0) throw WireError("Bloom filter with zero bits", 0);
  if (k < 1 || k > kMaxHashes) throw WireError("Bloom hash count out of range", 4);
  const std::size_t nbytes = (std::size_t{m} + 7) / 8;
  if (b.size() != 8 + nbytes) {
    throw WireError("Bloom bit vector length does not match m",
                    std::min(b.size(), 8 + nbytes));
  }
  BloomFilter f(m, static_cast<int>(k));
  for (std::size_t j = 0; j < nbytes; ++j) {
    const std::uint8_t v = reverse_bits(b[8 + j]);
    if (v == 0) continue;
    if (j == nbytes - 1 && m % 8 != 0 && (v >> (m % 8)) != 0) {
      throw WireError("Bloom padding bits set", 8 + j);
    }
    f.words_[j / 8] |= std::uint64_t{v} << ((j % 8) * 8);
  }
  return f;
}

// ---------------------------------------------------------------------------

GlobalStopSet::GlobalStopSet(StopSetImpl impl, int prefix_len,
                             BloomParams bloom)
    : impl_(impl), prefix_len_(prefix_len), bloom_params_(bloom) {
  if (prefix_len < 0 || prefix_len > 32) {
    throw std::invalid_argument("prefix length must be within 0..32");
  }
  if (impl_ == StopSetImpl::Bloom) bloom_.emplace_back(bloom.bits, bloom.hashes);
}

bool GlobalStopSet::insert(PairKey key) {
  std::unique_lock lock(mutex_);
  if (impl_ == StopSetImpl::List) return pairs_.insert(key).second;
  const bool present = bloom_.front().contains(key);
  bloom_.front().insert(key);
  return !present;
}

bool GlobalStopSet::contains(PairKey key) const {
  std::shared_lock lock(mutex_);
  if (impl_ == StopSetImpl::List) return pairs_.contains(key);
  return bloom_.front().contains(key);
}

void GlobalStopSet::merge_update(std::span<const PairKey> pairs) {
  for (PairKey k : pairs) insert(k);
}

void GlobalStopSet::merge_filter(const BloomFilter& filter) {
  if (impl_ != StopSetImpl::Bloom) {
    throw std::logic_error("list stop set cannot absorb a Bloom filter");
  }
  std::unique_lock lock(mutex_);
  bloom_.front().merge(filter);
}

std::size_t GlobalStopSet::list_size() const {
  std::shared_lock lock(mutex_);
  return pairs_.size();
}

BloomFilter GlobalStopSet::filter() const {
  if (impl_ != StopSetImpl::Bloom) {
    throw std::logic_error("list stop set has no Bloom filter");
  }
  std::shared_lock lock(mutex_);
  return bloom_.front();
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> serialize_update(std::span<const PairKey> pairs) {
  std::vector<std::uint8_t> out(pairs.size() * 8);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    put_u32(out.data() + 8 * i, pairs[i].iface.value);
    put_u32(out.data() + 8 * i + 4, pairs[i].dest_key.value);
  }
  return out;
}

std::vector<PairKey> parse_update(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) {
    throw WireError("stop set length " + std::to_string(bytes.size()) +
                        " is not a multiple of 8",
                    bytes.size() - bytes.size() % 8);
  }
  std::vector<PairKey> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {Address{get_u32(bytes.data() + 8 * i)},
              Address{get_u32(bytes.data() + 8 * i + 4)}};
  }
  return out;
}

}  // namespace dtree
