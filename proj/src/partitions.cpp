#include "dpoly/partitions.hpp"

#include <algorithm>
#include <stdexcept>

namespace dpoly {

int SetPartition::block_of(int element) const {
  for (int b = 0; b < size(); ++b)
    for (int e : blocks[std::size_t(b)])
      if (e == element) return b;
  throw std::out_of_range("SetPartition: element outside ground set");
}

std::pair<int, int> SetPartition::pair_block() const {
  if (size() != h - 1) throw std::logic_error("pair_block: partition is not pair + singletons");
  for (const auto& b : blocks)
    if (b.size() == 2) return {b[0], b[1]};
  throw std::logic_error("pair_block: no pair found");
}

SetPartition SetPartition::singletons(int h) {
  SetPartition p;
  p.h = h;
  for (int i = 0; i < h; ++i) p.blocks.push_back({i});
  return p;
}

SetPartition SetPartition::from_blocks(int h, std::vector<std::vector<int>> blocks) {
  SetPartition p;
  p.h = h;
  std::vector<bool> seen(std::size_t(h), false);
  for (auto& b : blocks) {
    if (b.empty()) throw std::invalid_argument("SetPartition: empty block");
    std::sort(b.begin(), b.end());
    for (int e : b) {
      if (e < 0 || e >= h || seen[std::size_t(e)])
        throw std::invalid_argument("SetPartition: blocks must partition {1..h}");
      seen[std::size_t(e)] = true;
    }
  }
  for (bool s : seen)
    if (!s) throw std::invalid_argument("SetPartition: blocks must cover {1..h}");
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& a, const auto& b) { return a[0] < b[0]; });
  p.blocks = std::move(blocks);
  return p;
}

std::string SetPartition::to_string() const {
  std::string s = "{";
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) s += "|";
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      if (i) s += ",";
      s += std::to_string(blocks[b][i] + 1);
    }
  }
  return s + "}";
}

std::vector<SetPartition> partitions(int h) {
  if (h < 2 || h > 6) throw std::invalid_argument("partitions: need 2 <= h <= 6");
  // restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[0..i-1])
  std::vector<SetPartition> out;
  std::vector<int> a(std::size_t(h), 0);
  auto emit = [&]() {
    const int m = *std::max_element(a.begin(), a.end()) + 1;
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(m));
    for (int i = 0; i < h; ++i) blocks[std::size_t(a[std::size_t(i)])].push_back(i);
    out.push_back(SetPartition::from_blocks(h, std::move(blocks)));
  };
  // iterate RGS in lexicographic order
  while (true) {
    emit();
    int i = h - 1;
    for (; i >= 1; --i) {
      int mx = 0;
      for (int j = 0; j < i; ++j) mx = std::max(mx, a[std::size_t(j)]);
      if (a[std::size_t(i)] < mx + 1) break;
    }
    if (i < 1) break;
    ++a[std::size_t(i)];
    for (int j = i + 1; j < h; ++j) a[std::size_t(j)] = 0;
  }
  return out;
}

std::vector<SetPartition> partitions_with_size(int h, int m) {
  std::vector<SetPartition> out;
  for (auto& p : partitions(h))
    if (p.size() == m) out.push_back(std::move(p));
  return out;
}

bool sequence_valid(const std::vector<SetPartition>& seq) {
  if (seq.empty()) return false;
  const int h = seq.front().h;
  std::vector<bool> covered(std::size_t(h), false);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const SetPartition& I = seq[i];
    if (I.h != h || !I.nontrivial()) return false;
    if (i > 0 && I.size() == h - 1 && seq[i - 1].size() == h - 1 && I == seq[i - 1]) return false;
    for (const auto& b : I.blocks)
      if (b.size() >= 2)
        for (int e : b) covered[std::size_t(e)] = true;
  }
  for (bool c : covered)
    if (!c) return false;
  return true;
}

std::vector<std::vector<SetPartition>> valid_sequences(int h, int k_max) {
  std::vector<SetPartition> nontriv;
  for (auto& p : partitions(h))
    if (p.nontrivial()) nontriv.push_back(std::move(p));
  std::vector<std::vector<SetPartition>> out;
  std::vector<SetPartition> cur;
  auto rec = [&](auto&& self, int depth) -> void {
    if (depth > 0 && sequence_valid(cur)) out.push_back(cur);
    if (depth == k_max) return;
    for (const auto& p : nontriv) {
      if (!cur.empty() && p.size() == h - 1 && cur.back().size() == h - 1 && p == cur.back())
        continue;
      cur.push_back(p);
      self(self, depth + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace dpoly
