// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Stage-1 semantic indexing: residual k-means over content embeddings, the
// collision-disambiguation level, SID table persistence and a prefix trie used
// for constrained decoding.

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "irr/rng.hpp"
#include "irr/tensor.hpp"

namespace irr::index {

struct ContentEmbeddings {
  std::vector<std::string> item_ids;
  DenseMatrix matrix;  // one row per item id

  /// Throws DataError on duplicate ids, row-count mismatch or non-finite values.
  void validate() const;
};

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  DenseMatrix centroids;
  std::vector<std::size_t> assignments;
  /// WCSS with the seed centroids, then after every Lloyd iteration.
  std::vector<double> wcss_history;
  std::size_t iterations = 0;
  bool converged = false;
};

/// k-means++ seeding followed by Lloyd iterations. Nearest-centroid ties go to
/// the lowest index; an empty cluster is re-seeded with the point farthest
/// from its own centroid.
KMeansResult kmeans(const DenseMatrix& points, std::size_t clusters, std::size_t max_iters,
                    std::uint64_t seed);

/// Lloyd iterations from explicit starting centroids.
KMeansResult lloyd(const DenseMatrix& points, DenseMatrix centroids, std::size_t max_iters);

DenseMatrix kmeans_plus_plus(const DenseMatrix& points, std::size_t clusters, Rng& rng);

double within_cluster_sum_of_squares(const DenseMatrix& points, const DenseMatrix& centroids,
                                     std::span<const std::size_t> assignments);

// ---------------------------------------------------------------------------
// residual quantization

struct CentroidSet {
  std::size_t level = 0;  // 1-based
  DenseMatrix centroids;  // K x d_c
};

struct ResidualOptions {
  std::size_t levels = 3;
  std::size_t codebook_size = 128;
  std::uint64_t seed = 0;
  std::size_t max_iters = 50;
  /// If nonzero, the full SID length L the codes must fit into. Level l then
  /// admits at most K^(L-l) items per prefix (c_1..c_l), which keeps every
  /// collision group within the K slots of the final disambiguation level.
  std::size_t capacity_depth = 0;
};

struct ResidualQuantization {
  /// codes[item][level-1]
  std::vector<std::vector<std::uint32_t>> codes;
  std::vector<CentroidSet> centroid_sets;
  /// Mean residual L2 norm: [0] for the raw input, [l] after level l.
  std::vector<double> mean_residual_norm;
};

ResidualQuantization residual_quantize(const DenseMatrix& embeddings,
                                       const ResidualOptions& options);

// ---------------------------------------------------------------------------
// SID table

struct SidCode {
  std::vector<std::uint32_t> codes;

  std::size_t size() const noexcept { return codes.size(); }
  std::uint32_t operator[](std::size_t l) const { return codes[l]; }
  std::string to_string() const;
  auto operator<=>(const SidCode&) const = default;
};

class SidTable {
 public:
  SidTable() = default;
  SidTable(std::size_t levels, std::size_t codebook_size, std::string method = "rkmeans",
           std::uint64_t seed = 0);

  /// Throws DataError on a duplicate item or duplicate full code, ContractError
  /// on a wrong-length or out-of-range code.
  void insert(const std::string& item_id, SidCode code);

  bool contains(const std::string& item_id) const { return entries_.count(item_id) != 0; }
  const SidCode& at(const std::string& item_id) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t levels() const noexcept { return levels_; }
  std::size_t codebook_size() const noexcept { return codebook_size_; }
  const std::string& method() const noexcept { return method_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::map<std::string, SidCode>& entries() const noexcept { return entries_; }

  bool operator==(const SidTable&) const = default;

 private:
  std::size_t levels_ = 0;
  std::size_t codebook_size_ = 0;
  std::string method_;
  std::uint64_t seed_ = 0;
  std::map<std::string, SidCode> entries_;
  std::map<SidCode, std::string> reverse_;
};

/// Appends the disambiguation code: items sharing a semantic prefix are
/// numbered 0, 1, ... in ascending item-id order; a unique prefix gets 0.
/// Throws CapacityError when a prefix group exceeds `codebook_size`.
SidTable assign_dedup_level(std::span<const std::string> item_ids,
                            const std::vector<std::vector<std::uint32_t>>& semantic_codes,
                            std::size_t codebook_size, std::string method = "rkmeans",
                            std::uint64_t seed = 0);

struct IndexerConfig {
  std::size_t levels = 4;  // full SID length L
  std::size_t codebook_size = 128;
  std::uint64_t seed = 42;
  std::size_t max_iters = 50;
  /// true: L-1 semantic levels plus the disambiguation level.
  /// false: all L levels semantic; collisions are a DataError.
  bool dedup_level = true;
  /// Capacity-constrained assignment so every prefix group fits (dedup mode only).
  bool balanced = true;
};

SidTable build_sid_table(const ContentEmbeddings& embeddings, const IndexerConfig& config);

void write_sid_table(const SidTable& table, std::ostream& out);
SidTable read_sid_table(std::istream& in);
void save_sid_table(const SidTable& table, const std::filesystem::path& path);
SidTable load_sid_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// embedding files: "IRRM", u32 rows, u32 cols, f32 values (all little-endian);
// item ids one per line in "<path>.ids".

std::filesystem::path ids_sidecar(const std::filesystem::path& path);
void save_embeddings(const ContentEmbeddings& embeddings, const std::filesystem::path& path);
ContentEmbeddings load_embeddings(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// prefix trie

class PrefixTrie {
 public:
  explicit PrefixTrie(std::size_t levels = 0);

  void insert(const SidCode& code, const std::string& item_id);

  /// True if some stored SID starts with `prefix` (the empty prefix included).
  bool contains_prefix(std::span<const std::uint32_t> prefix) const;
  /// Codes that extend `prefix` by one level, ascending.
  std::vector<std::uint32_t> children(std::span<const std::uint32_t> prefix) const;
  /// Item stored under a full SID, or nullptr.
  const std::string* find(std::span<const std::uint32_t> code) const;

  std::size_t levels() const noexcept { return levels_; }
  std::size_t leaf_count() const noexcept { return items_.size(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  /// All (SID, item) leaves in lexicographic SID order.
  std::vector<std::pair<SidCode, std::string>> leaves() const;

 private:
  static constexpr std::uint32_t kNoNode = 0xffffffffu;
  struct Node {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> children;  // (code, node), sorted
    std::uint32_t item = kNoNode;
  };

  std::uint32_t locate(std::span<const std::uint32_t> prefix) const;

  std::size_t levels_;
  std::vector<Node> nodes_;
  std::vector<std::string> items_;
};

PrefixTrie build_prefix_trie(const SidTable& table);

}  // namespace irr::index
