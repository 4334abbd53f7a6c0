// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "irr/error.hpp"
#include "irr/indexer.hpp"

namespace irr::index {

void ContentEmbeddings::validate() const {
  if (item_ids.size() != matrix.rows()) {
    throw DataError("embeddings: " + std::to_string(item_ids.size()) + " ids for " +
                    std::to_string(matrix.rows()) + " rows");
  }
  std::set<std::string> seen;
  for (const auto& id : item_ids) {
    if (!seen.insert(id).second) throw DataError("embeddings: duplicate item id '" + id + "'");
  }
  if (!all_finite(matrix)) throw DataError("embeddings: non-finite value");
}

std::string SidCode::to_string() const {
  std::string out;
  for (std::size_t l = 0; l < codes.size(); ++l) {
    if (l) out += ',';
    out += std::to_string(codes[l]);
  }
  return out;
}

SidTable::SidTable(std::size_t levels, std::size_t codebook_size, std::string method,
                   std::uint64_t seed)
    : levels_(levels), codebook_size_(codebook_size), method_(std::move(method)), seed_(seed) {
  if (levels == 0 || codebook_size == 0) throw ConfigError("sid table: L and K must be positive");
}

void SidTable::insert(const std::string& item_id, SidCode code) {
  if (code.size() != levels_) {
    throw ContractError("sid table: code of length " + std::to_string(code.size()) +
                        " for L=" + std::to_string(levels_));
  }
  for (auto c : code.codes) {
    if (c >= codebook_size_) {
      throw ContractError("sid table: code " + std::to_string(c) + " outside K=" +
                          std::to_string(codebook_size_));
    }
  }
  if (entries_.count(item_id)) throw DataError("sid table: duplicate item '" + item_id + "'");
  if (auto it = reverse_.find(code); it != reverse_.end()) {
    throw DataError("sid table: items '" + it->second + "' and '" + item_id + "' share SID " +
                    code.to_string());
  }
  reverse_.emplace(code, item_id);
  entries_.emplace(item_id, std::move(code));
}

const SidCode& SidTable::at(const std::string& item_id) const {
  auto it = entries_.find(item_id);
  if (it == entries_.end()) throw LookupError("sid table: unknown item '" + item_id + "'");
  return it->second;
}

SidTable assign_dedup_level(std::span<const std::string> item_ids,
                            const std::vector<std::vector<std::uint32_t>>& semantic_codes,
                            std::size_t codebook_size, std::string method, std::uint64_t seed) {
  if (item_ids.size() != semantic_codes.size()) {
    throw ContractError("dedup: id and code counts differ");
  }
  if (item_ids.empty()) throw EmptyDatasetError("dedup: no items");
  const std::size_t prefix_len = semantic_codes.front().size();
  std::map<std::vector<std::uint32_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < item_ids.size(); ++i) {
    if (semantic_codes[i].size() != prefix_len) {
      throw ContractError("dedup: item '" + item_ids[i] + "' has a prefix of length " +
                          std::to_string(semantic_codes[i].size()));
    }
    groups[semantic_codes[i]].push_back(i);
  }
  SidTable table(prefix_len + 1, codebook_size, std::move(method), seed);
  for (auto& [prefix, members] : groups) {
    if (members.size() > codebook_size) {
      throw CapacityError("dedup: prefix (" + SidCode{prefix}.to_string() + ") holds " +
                          std::to_string(members.size()) + " items, K=" +
                          std::to_string(codebook_size));
    }
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return item_ids[a] < item_ids[b]; });
    for (std::size_t slot = 0; slot < members.size(); ++slot) {
      SidCode code{prefix};
      code.codes.push_back(static_cast<std::uint32_t>(slot));
      table.insert(item_ids[members[slot]], std::move(code));
    }
  }
  return table;
}

SidTable build_sid_table(const ContentEmbeddings& embeddings, const IndexerConfig& config) {
  embeddings.validate();
  if (config.levels == 0) throw ConfigError("indexer.L must be at least 1");
  if (config.dedup_level && config.levels < 2) {
    throw ConfigError("indexer.L must be at least 2 with a dedup level");
  }
  ResidualOptions opts;
  opts.levels = config.dedup_level ? config.levels - 1 : config.levels;
  opts.codebook_size = config.codebook_size;
  opts.seed = config.seed;
  opts.max_iters = config.max_iters;
  opts.capacity_depth = config.dedup_level && config.balanced ? config.levels : 0;
  const auto rq = residual_quantize(embeddings.matrix, opts);

  const std::string method = "rkmeans";
  if (config.dedup_level) {
    return assign_dedup_level(embeddings.item_ids, rq.codes, config.codebook_size, method,
                              config.seed);
  }
  SidTable table(config.levels, config.codebook_size, method, config.seed);
  for (std::size_t i = 0; i < embeddings.item_ids.size(); ++i) {
    table.insert(embeddings.item_ids[i], SidCode{rq.codes[i]});
  }
  return table;
}

// ---------------------------------------------------------------------------
// text format

namespace {

std::uint64_t parse_unsigned(const std::string& text, std::size_t line, const char* what) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) {
        return c >= '0' && c <= '9';
      })) {
    throw ParseError(std::string("expected unsigned integer for ") + what + ", got '" + text + "'",
                     line);
  }
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw ParseError(std::string(what) + " out of range", line);
  }
}

std::string header_field(const std::string& header, const std::string& key, std::size_t line) {
  std::istringstream in(header);
  std::string token;
  while (in >> token) {
    if (token.rfind(key + "=", 0) == 0) return token.substr(key.size() + 1);
  }
  throw ParseError("sid header lacks '" + key + "='", line);
}

}  // namespace

void write_sid_table(const SidTable& table, std::ostream& out) {
  out << "#sid L=" << table.levels() << " K=" << table.codebook_size()
      << " method=" << table.method() << " seed=" << table.seed() << '\n';
  for (const auto& [item, code] : table.entries()) out << item << '\t' << code.to_string() << '\n';
}

SidTable read_sid_table(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  if (!std::getline(in, line)) throw ParseError("empty SID table", 1);
  ++number;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("#sid", 0) != 0) throw ParseError("missing '#sid' header", number);
  const auto levels = parse_unsigned(header_field(line, "L", number), number, "L");
  const auto k = parse_unsigned(header_field(line, "K", number), number, "K");
  const auto method = header_field(line, "method", number);
  const auto seed = parse_unsigned(header_field(line, "seed", number), number, "seed");
  if (levels == 0 || k == 0) throw ParseError("L and K must be positive", number);
  SidTable table(levels, k, method, seed);

  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected item<TAB>codes", number);
    const std::string item = line.substr(0, tab);
    SidCode code;
    std::stringstream fields(line.substr(tab + 1));
    std::string field;
    while (std::getline(fields, field, ',')) {
      const auto value = parse_unsigned(field, number, "code");
      if (value >= k) {
        throw ParseError("code " + field + " outside K=" + std::to_string(k), number);
      }
      code.codes.push_back(static_cast<std::uint32_t>(value));
    }
    if (code.size() != levels) {
      throw ParseError(std::to_string(code.size()) + " codes where header says L=" +
                           std::to_string(levels),
                       number);
    }
    try {
      table.insert(item, std::move(code));
    } catch (const DataError& e) {
      throw DataError(std::string("line ") + std::to_string(number) + ": " + e.what());
    }
  }
  return table;
}

void save_sid_table(const SidTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_sid_table(table, out);
  if (!out) throw DataError("write failed: " + path.string());
}

SidTable load_sid_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read_sid_table(in);
}

// ---------------------------------------------------------------------------
// embedding binary

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& source) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated file " + source);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

std::filesystem::path ids_sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".ids");
}

void save_embeddings(const ContentEmbeddings& embeddings, const std::filesystem::path& path) {
  embeddings.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write("IRRM", 4);
  put_u32(out, static_cast<std::uint32_t>(embeddings.matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(embeddings.matrix.cols()));
  for (double v : embeddings.matrix.values()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ofstream ids(ids_sidecar(path), std::ios::binary);
  if (!ids) throw DataError("cannot write " + ids_sidecar(path).string());
  for (const auto& id : embeddings.item_ids) ids << id << '\n';
}

ContentEmbeddings load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "IRRM", 4) != 0) {
    throw DataError(path.string() + ": bad magic, expected IRRM");
  }
  const auto rows = get_u32(in, path.string());
  const auto cols = get_u32(in, path.string());
  ContentEmbeddings out;
  out.matrix = DenseMatrix(rows, cols);
  for (double& v : out.matrix.values()) {
    v = static_cast<double>(std::bit_cast<float>(get_u32(in, path.string())));
  }
  std::ifstream ids(ids_sidecar(path), std::ios::binary);
  if (!ids) throw DataError("cannot read " + ids_sidecar(path).string());
  std::string line;
  while (std::getline(ids, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.item_ids.push_back(line);
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// trie

PrefixTrie::PrefixTrie(std::size_t levels) : levels_(levels), nodes_(1) {}

void PrefixTrie::insert(const SidCode& code, const std::string& item_id) {
  if (code.size() != levels_) throw ContractError("trie: SID length differs from trie depth");
  std::uint32_t node = 0;
  for (auto c : code.codes) {
    auto& kids = nodes_[node].children;
    auto it = std::lower_bound(kids.begin(), kids.end(), c,
                               [](const auto& kid, std::uint32_t v) { return kid.first < v; });
    if (it != kids.end() && it->first == c) {
      node = it->second;
      continue;
    }
    const auto fresh = static_cast<std::uint32_t>(nodes_.size());
    kids.insert(it, {c, fresh});
    nodes_.emplace_back();
    node = fresh;
  }
  if (nodes_[node].item != kNoNode) throw DataError("trie: SID " + code.to_string() + " stored twice");
  nodes_[node].item = static_cast<std::uint32_t>(items_.size());
  items_.push_back(item_id);
}

std::uint32_t PrefixTrie::locate(std::span<const std::uint32_t> prefix) const {
  if (prefix.size() > levels_) return kNoNode;
  std::uint32_t node = 0;
  for (auto c : prefix) {
    const auto& kids = nodes_[node].children;
    auto it = std::lower_bound(kids.begin(), kids.end(), c,
                               [](const auto& kid, std::uint32_t v) { return kid.first < v; });
    if (it == kids.end() || it->first != c) return kNoNode;
    node = it->second;
  }
  return node;
}

bool PrefixTrie::contains_prefix(std::span<const std::uint32_t> prefix) const {
  return locate(prefix) != kNoNode;
}

std::vector<std::uint32_t> PrefixTrie::children(std::span<const std::uint32_t> prefix) const {
  std::vector<std::uint32_t> out;
  const auto node = locate(prefix);
  if (node == kNoNode) return out;
  for (const auto& kid : nodes_[node].children) out.push_back(kid.first);
  return out;
}

const std::string* PrefixTrie::find(std::span<const std::uint32_t> code) const {
  if (code.size() != levels_) return nullptr;
  const auto node = locate(code);
  if (node == kNoNode || nodes_[node].item == kNoNode) return nullptr;
  return &items_[nodes_[node].item];
}

std::vector<std::pair<SidCode, std::string>> PrefixTrie::leaves() const {
  std::vector<std::pair<SidCode, std::string>> out;
  std::vector<std::uint32_t> path;
  auto walk = [&](auto&& self, std::uint32_t node) -> void {
    if (nodes_[node].item != kNoNode) out.emplace_back(SidCode{path}, items_[nodes_[node].item]);
    for (const auto& [code, child] : nodes_[node].children) {
      path.push_back(code);
      self(self, child);
      path.pop_back();
    }
  };
  walk(walk, 0);
  return out;
}

PrefixTrie build_prefix_trie(const SidTable& table) {
  PrefixTrie trie(table.levels());
  for (const auto& [item, code] : table.entries()) trie.insert(code, item);
  return trie;
}

}  // namespace irr::index
