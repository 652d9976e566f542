#include "storyframe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

#include "storyframe/llm_client.hpp"

namespace storyframe {

// ---------------------------------------------------------------- tokenize

namespace {

// Decodes one code point; invalid sequences yield U+FFFD and consume a byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) len = 2, cp = b0 & 0x1F;
  else if ((b0 & 0xF0) == 0xE0) len = 3, cp = b0 & 0x0F;
  else if ((b0 & 0xF8) == 0xF0) len = 4, cp = b0 & 0x07;
  for (int k = 1; k < len; ++k) {
    const int c = cont(k);
    if (c < 0) {
      len = 0;
      break;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  if (len == 0) {
    ++i;
    return 0xFFFD;
  }
  i += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_separator(char32_t c) {
  if (c < 0x80) {
    return !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'));
  }
  if (c <= 0xBF) return c != 0xAA && c != 0xB5 && c != 0xBA;  // Latin-1 punctuation and NBSP
  if (c == 0xD7 || c == 0xF7) return true;
  if (c >= 0x2000 && c <= 0x206F) return true;  // general punctuation and spaces
  if (c >= 0x2190 && c <= 0x2BFF) return true;  // arrows, math, box drawing, misc symbols
  if (c >= 0x3000 && c <= 0x303F) return true;  // CJK punctuation
  if (c >= 0xFE30 && c <= 0xFE4F) return true;
  if (c >= 0xFF01 && c <= 0xFF0F) return true;
  if (c >= 0xFF1A && c <= 0xFF20) return true;
  return c == 0xFFFD || c == 0xFEFF;
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 32;
  if (c >= 0x100 && c <= 0x17F) {
    if (c == 0x130) return 'i';
    if (c == 0x178) return 0xFF;
    const bool odd_upper = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    const bool even_upper = (c <= 0x137) || (c >= 0x14A && c <= 0x177);
    if (odd_upper && (c % 2 == 1)) return c + 1;
    if (even_upper && (c % 2 == 0)) return c + 1;
    return c;
  }
  if (c == 0x386) return 0x3AC;
  if (c >= 0x388 && c <= 0x38A) return c + 37;
  if (c == 0x38C) return 0x3CC;
  if (c == 0x38E || c == 0x38F) return c + 63;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  return c;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t c = next_code_point(text, i);
    if (is_separator(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      append_utf8(current, to_lower(c));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ----------------------------------------------------------------- ROUGE-L

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const std::vector<std::string>& reference,
                   const std::vector<std::string>& hypothesis) {
  RougeScore s;
  if (reference.empty() || hypothesis.empty()) return s;
  const double lcs = static_cast<double>(lcs_length(reference, hypothesis));
  s.precision = lcs / static_cast<double>(hypothesis.size());
  s.recall = lcs / static_cast<double>(reference.size());
  if (s.precision + s.recall > 0) {
    s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

// ------------------------------------------------------------------ METEOR

namespace {

using Alignment = std::vector<int>;  // hyp index -> ref index or -1

std::size_t count_chunks(const Alignment& align) {
  std::size_t chunks = 0;
  for (std::size_t i = 0; i < align.size(); ++i) {
    if (align[i] < 0) continue;
    const bool continues = i > 0 && align[i - 1] >= 0 && align[i - 1] + 1 == align[i];
    if (!continues) ++chunks;
  }
  return chunks;
}

// Repeatedly aligns the longest common run of still unmatched tokens.
Alignment greedy_alignment(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  Alignment align(hyp.size(), -1);
  std::vector<bool> ref_used(ref.size(), false);
  while (true) {
    std::size_t best_len = 0, best_i = 0, best_j = 0;
    std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
      for (std::size_t j = 1; j <= ref.size(); ++j) {
        if (align[i - 1] < 0 && !ref_used[j - 1] && hyp[i - 1] == ref[j - 1]) {
          cur[j] = prev[j - 1] + 1;
          if (cur[j] > best_len) best_len = cur[j], best_i = i, best_j = j;
        } else {
          cur[j] = 0;
        }
      }
      std::swap(prev, cur);
    }
    if (best_len == 0) break;
    for (std::size_t k = 0; k < best_len; ++k) {
      align[best_i - best_len + k] = static_cast<int>(best_j - best_len + k);
      ref_used[best_j - best_len + k] = true;
    }
  }
  return align;
}

// Depth-first search over maximum-match alignments for the fewest chunks.
class ChunkSearch {
 public:
  ChunkSearch(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
              std::size_t budget)
      : ref_(ref), hyp_(hyp), budget_(budget) {
    std::map<std::string, int> ids;
    auto id_of = [&](const std::string& w) { return ids.emplace(w, static_cast<int>(ids.size())).first->second; };
    for (const auto& w : hyp_) hyp_ids_.push_back(id_of(w));
    for (const auto& w : ref_) ref_ids_.push_back(id_of(w));
    const std::size_t types = ids.size();
    std::vector<int> ref_count(types, 0), hyp_count(types, 0);
    for (int w : ref_ids_) ++ref_count[w];
    for (int w : hyp_ids_) ++hyp_count[w];
    need_.resize(types);
    for (std::size_t w = 0; w < types; ++w) need_[w] = std::min(ref_count[w], hyp_count[w]);
    hyp_left_ = hyp_count;
    positions_.resize(types);
    for (std::size_t j = 0; j < ref_ids_.size(); ++j) positions_[ref_ids_[j]].push_back(static_cast<int>(j));
    ref_used_.assign(ref_.size(), false);
    current_.assign(hyp_.size(), -1);
  }

  std::size_t max_matches() const { return std::accumulate(need_.begin(), need_.end(), std::size_t{0}); }

  // Returns true when the search completed within budget.
  bool run(Alignment& best, std::size_t& best_chunks) {
    best_ = &best;
    best_chunks_ = &best_chunks;
    dfs(0, -2, 0);
    return !exhausted_;
  }

 private:
  void dfs(std::size_t i, int prev_j, std::size_t chunks) {
    if (exhausted_) return;
    if (++visited_ > budget_) {
      exhausted_ = true;
      return;
    }
    if (chunks >= *best_chunks_) return;
    if (i == hyp_.size()) {
      *best_ = current_;
      *best_chunks_ = chunks;
      return;
    }
    const int w = hyp_ids_[i];
    --hyp_left_[w];
    if (need_[w] > 0) {
      --need_[w];
      // Continuing the current chunk first finds good bounds early.
      const int cont = prev_j + 1;
      if (prev_j >= 0 && cont < static_cast<int>(ref_.size()) && !ref_used_[cont] &&
          ref_ids_[cont] == w) {
        take(i, cont, chunks);
      }
      for (int j : positions_[w]) {
        if (j == cont && prev_j >= 0) continue;
        if (ref_used_[j]) continue;
        take(i, j, chunks + 1);
        if (exhausted_) break;
      }
      ++need_[w];
    }
    if (hyp_left_[w] >= need_[w]) dfs(i + 1, -2, chunks);
    ++hyp_left_[w];
  }

  void take(std::size_t i, int j, std::size_t chunks) {
    ref_used_[j] = true;
    current_[i] = j;
    dfs(i + 1, j, chunks);
    current_[i] = -1;
    ref_used_[j] = false;
  }

  const std::vector<std::string>& ref_;
  const std::vector<std::string>& hyp_;
  std::size_t budget_;
  std::vector<int> hyp_ids_, ref_ids_, need_, hyp_left_;
  std::vector<std::vector<int>> positions_;
  std::vector<bool> ref_used_;
  Alignment current_;
  Alignment* best_ = nullptr;
  std::size_t* best_chunks_ = nullptr;
  std::size_t visited_ = 0;
  bool exhausted_ = false;
};

}  // namespace

MeteorDetail meteor_detail(const std::vector<std::string>& reference,
                           const std::vector<std::string>& hypothesis, const MeteorParams& params) {
  MeteorDetail d;
  if (reference.empty() || hypothesis.empty()) return d;
  Alignment best = greedy_alignment(reference, hypothesis);
  std::size_t matches = 0;
  for (int j : best) matches += j >= 0;
  if (matches == 0) return d;
  std::size_t chunks = count_chunks(best);
  if (chunks > 1) {
    ChunkSearch search(reference, hypothesis, params.search_budget);
    d.exact_search = search.run(best, chunks);
  }
  d.matches = matches;
  d.chunks = chunks;
  const double m = static_cast<double>(matches);
  d.precision = m / static_cast<double>(hypothesis.size());
  d.recall = m / static_cast<double>(reference.size());
  d.fmean = d.precision * d.recall / (params.alpha * d.precision + (1 - params.alpha) * d.recall);
  d.penalty = params.gamma * std::pow(static_cast<double>(chunks) / m, params.beta);
  d.score = d.fmean * (1 - d.penalty);
  return d;
}

double meteor(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis) {
  return meteor_detail(reference, hypothesis).score;
}

// -------------------------------------------------------- tree edit distance

std::size_t LabeledTree::size() const {
  std::size_t n = 1;
  for (const auto& c : children) n += c.size();
  return n;
}

LabeledTree json_to_tree(const Json& doc) {
  switch (doc.type()) {
    case Json::value_t::object: {
      LabeledTree node{"obj", {}};
      std::vector<std::string> keys;
      for (const auto& [key, value] : doc.items()) keys.push_back(key);
      std::sort(keys.begin(), keys.end());
      for (const auto& key : keys) node.children.push_back({key, {json_to_tree(doc.at(key))}});
      return node;
    }
    case Json::value_t::array: {
      LabeledTree node{"arr", {}};
      for (const auto& item : doc) node.children.push_back(json_to_tree(item));
      return node;
    }
    case Json::value_t::string: return {"str:" + doc.get<std::string>(), {}};
    case Json::value_t::boolean: return {std::string("bool:") + (doc.get<bool>() ? "true" : "false"), {}};
    case Json::value_t::null: return {"null:null", {}};
    default: return {"num:" + doc.dump(), {}};
  }
}

namespace {

struct PostorderTree {
  std::vector<const std::string*> labels;
  std::vector<std::size_t> leftmost;
  std::vector<std::size_t> keyroots;

  explicit PostorderTree(const LabeledTree& root) {
    visit(root);
    // A keyroot is the highest-numbered node with a given leftmost leaf.
    std::vector<bool> seen(labels.size(), false);
    for (std::size_t i = labels.size(); i-- > 0;) {
      if (!seen[leftmost[i]]) {
        seen[leftmost[i]] = true;
        keyroots.push_back(i);
      }
    }
    std::sort(keyroots.begin(), keyroots.end());
  }

  std::size_t visit(const LabeledTree& node) {
    std::optional<std::size_t> first_leaf;
    for (const auto& child : node.children) {
      const auto child_index = visit(child);
      if (!first_leaf) first_leaf = leftmost[child_index];
    }
    labels.push_back(&node.label);
    leftmost.push_back(first_leaf.value_or(labels.size() - 1));
    return labels.size() - 1;
  }
};

}  // namespace

std::size_t tree_edit_distance(const LabeledTree& a, const LabeledTree& b) {
  const PostorderTree t1(a), t2(b);
  const std::size_t n1 = t1.labels.size(), n2 = t2.labels.size();
  std::vector<std::size_t> td(n1 * n2, 0);
  std::vector<std::size_t> fd((n1 + 1) * (n2 + 1), 0);
  const std::size_t w = n2 + 1;

  for (std::size_t i : t1.keyroots) {
    for (std::size_t j : t2.keyroots) {
      const std::size_t l1 = t1.leftmost[i], l2 = t2.leftmost[j];
      // fd[x][y] is the distance between forests l1..l1+x-1 and l2..l2+y-1.
      fd[0] = 0;
      for (std::size_t x = 1; x <= i - l1 + 1; ++x) fd[x * w] = fd[(x - 1) * w] + 1;
      for (std::size_t y = 1; y <= j - l2 + 1; ++y) fd[y] = fd[y - 1] + 1;
      for (std::size_t x = 1; x <= i - l1 + 1; ++x) {
        const std::size_t u = l1 + x - 1;
        for (std::size_t y = 1; y <= j - l2 + 1; ++y) {
          const std::size_t v = l2 + y - 1;
          const std::size_t del = fd[(x - 1) * w + y] + 1;
          const std::size_t ins = fd[x * w + y - 1] + 1;
          if (t1.leftmost[u] == l1 && t2.leftmost[v] == l2) {
            const std::size_t rel = fd[(x - 1) * w + y - 1] + (*t1.labels[u] == *t2.labels[v] ? 0 : 1);
            fd[x * w + y] = std::min({del, ins, rel});
            td[u * n2 + v] = fd[x * w + y];
          } else {
            const std::size_t px = t1.leftmost[u] - l1, py = t2.leftmost[v] - l2;
            fd[x * w + y] = std::min({del, ins, fd[px * w + py] + td[u * n2 + v]});
          }
        }
      }
    }
  }
  return td[(n1 - 1) * n2 + (n2 - 1)];
}

// ---------------------------------------------------------- Mann-Whitney U

std::string_view to_string(UTestMethod method) {
  return method == UTestMethod::exact ? "exact" : "normal_approx";
}

double mann_whitney_exact_p(std::size_t n, std::size_t m, double u) {
  // prev[i][k]: orderings of i first-sample and `cols` second-sample values
  // with U = k, built up one second-sample value at a time.
  const std::size_t max_u = n * m;
  std::vector<std::vector<double>> prev(n + 1, std::vector<double>(max_u + 1, 0.0));
  for (std::size_t i = 0; i <= n; ++i) prev[i][0] = 1.0;  // m = 0
  for (std::size_t cols = 1; cols <= m; ++cols) {
    std::vector<std::vector<double>> cur(n + 1, std::vector<double>(max_u + 1, 0.0));
    cur[0][0] = 1.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t k = 0; k <= i * cols; ++k) {
        // The largest value belongs to sample one (it beats all `cols`) or to
        // sample two (adds nothing).
        double c = prev[i][k];
        if (k >= cols) c += cur[i - 1][k - cols];
        cur[i][k] = c;
      }
    }
    prev = std::move(cur);
  }
  const auto& dist = prev[n];
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  const auto cut = static_cast<long>(std::llround(u));
  double le = 0, ge = 0;
  for (std::size_t k = 0; k <= max_u; ++k) {
    if (static_cast<long>(k) <= cut) le += dist[k];
    if (static_cast<long>(k) >= cut) ge += dist[k];
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

UTestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                           std::optional<UTestMethod> force) {
  if (a.empty() || b.empty()) throw std::invalid_argument("both samples must be non-empty");
  const std::size_t n = a.size(), m = b.size(), total = n + m;
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(total);
  for (double x : a) pooled.emplace_back(x, 0);
  for (double x : b) pooled.emplace_back(x, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });

  double rank_sum_a = 0;
  double tie_term = 0;
  bool ties = false;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += midrank;
    }
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }

  UTestResult r;
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  r.u_statistic = rank_sum_a - dn * (dn + 1) / 2.0;

  if (pooled.front().first == pooled.back().first) {
    r.degenerate = true;
    r.method = UTestMethod::normal_approx;
    r.p_value = 1.0;
    return r;
  }

  const bool exact_ok = !ties && total <= 16;
  UTestMethod method = exact_ok ? UTestMethod::exact : UTestMethod::normal_approx;
  if (force) {
    if (*force == UTestMethod::exact && ties) {
      throw std::invalid_argument("the exact method needs samples without ties");
    }
    method = *force;
  }
  r.method = method;
  if (method == UTestMethod::exact) {
    r.p_value = mann_whitney_exact_p(n, m, r.u_statistic);
    return r;
  }
  const double dt = static_cast<double>(total);
  const double mu = dn * dm / 2.0;
  const double var = dn * dm / 12.0 * ((dt + 1) - tie_term / (dt * (dt - 1)));
  const double dev = std::max(std::abs(r.u_statistic - mu) - 0.5, 0.0);
  const double z = dev / std::sqrt(var);
  r.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return r;
}

// --------------------------------------------------------------- BERTScore

RougeScore bertscore(const std::string& reference, const std::string& hypothesis,
                     ChatClient* embedder) {
  if (!embedder) throw FeatureDisabled("BERTScore needs an embedding endpoint");
  const auto ref = tokenize(reference);
  const auto hyp = tokenize(hypothesis);
  RougeScore s;
  if (ref.empty() || hyp.empty()) return s;

  std::vector<std::string> vocab(ref.begin(), ref.end());
  vocab.insert(vocab.end(), hyp.begin(), hyp.end());
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  const auto vectors = embedder->embed(vocab);
  std::map<std::string, const Embedding*> table;
  for (std::size_t i = 0; i < vocab.size(); ++i) table[vocab[i]] = &vectors[i];

  auto cosine = [](const Embedding& x, const Embedding& y) {
    double dot = 0, nx = 0, ny = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      dot += x[i] * y[i];
      nx += x[i] * x[i];
      ny += y[i] * y[i];
    }
    return nx == 0 || ny == 0 ? 0.0 : dot / std::sqrt(nx * ny);
  };
  auto greedy = [&](const std::vector<std::string>& from, const std::vector<std::string>& to) {
    double sum = 0;
    for (const auto& t : from) {
      double best = -1;
      for (const auto& u : to) best = std::max(best, cosine(*table[t], *table[u]));
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  s.precision = greedy(hyp, ref);
  s.recall = greedy(ref, hyp);
  s.f1 = s.precision + s.recall == 0 ? 0 : 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace storyframe
