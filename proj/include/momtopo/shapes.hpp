#pragma once

// Binary shape words over the optimizable DOFs and the DOF set algebra
// (all, fixed, evaluation domain, active, removable, addable).

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "momtopo/core.hpp"

namespace momtopo {

/// Maps gene bit positions onto DOF indices. Fixed DOFs are always active and
/// carry no bit.
class Parameterization {
 public:
  Parameterization(int n_dof, DofList fixed) : n_dof_(n_dof), fixed_(std::move(fixed)) {
    if (n_dof < 1) throw InvalidArgument("n_dof must be >= 1");
    std::sort(fixed_.begin(), fixed_.end());
    fixed_.erase(std::unique(fixed_.begin(), fixed_.end()), fixed_.end());
    bit_of_.assign(static_cast<std::size_t>(n_dof), -1);
    for (int f : fixed_)
      if (f < 0 || f >= n_dof) throw InvalidArgument("fixed DOF " + std::to_string(f) + " out of range");
    std::vector<bool> is_fixed(static_cast<std::size_t>(n_dof), false);
    for (int f : fixed_) is_fixed[f] = true;
    for (int n = 0; n < n_dof; ++n)
      if (!is_fixed[n]) {
        bit_of_[n] = static_cast<int>(free_.size());
        free_.push_back(n);
      }
  }

  int n_dof() const { return n_dof_; }
  int n_opt() const { return static_cast<int>(free_.size()); }
  const DofList& fixed() const { return fixed_; }
  const DofList& free_dofs() const { return free_; }
  bool is_fixed(DofIndex n) const { return bit_of_.at(n) < 0; }
  /// Bit position of DOF n, -1 for fixed DOFs.
  int bit_of(DofIndex n) const { return bit_of_.at(n); }
  DofIndex dof_of(int bit) const { return free_.at(bit); }

  bool operator==(const Parameterization& o) const { return n_dof_ == o.n_dof_ && fixed_ == o.fixed_; }

 private:
  int n_dof_;
  DofList fixed_;
  DofList free_;
  std::vector<int> bit_of_;
};

using ParamPtr = std::shared_ptr<const Parameterization>;

inline ParamPtr make_parameterization(int n_dof, DofList fixed) {
  return std::make_shared<const Parameterization>(n_dof, std::move(fixed));
}

/// Value-type binary word, packed 64 bits per word.
class Gene {
 public:
  Gene() = default;
  explicit Gene(ParamPtr param, bool value = false) : param_(std::move(param)) {
    if (!param_) throw InvalidArgument("gene requires a parameterization");
    words_.assign(static_cast<std::size_t>((param_->n_opt() + 63) / 64), value ? ~std::uint64_t{0} : 0);
    trim();
  }

  static Gene zeros(ParamPtr p) { return Gene(std::move(p), false); }
  static Gene ones(ParamPtr p) { return Gene(std::move(p), true); }

  const Parameterization& param() const { return *param_; }
  const ParamPtr& param_ptr() const { return param_; }
  int n_opt() const { return param_ ? param_->n_opt() : 0; }
  int n_dof() const { return param_ ? param_->n_dof() : 0; }
  const std::vector<std::uint64_t>& words() const { return words_; }

  bool bit(int b) const {
    check(b);
    return (words_[b >> 6] >> (b & 63)) & 1u;
  }
  void set(int b, bool v) {
    check(b);
    const auto mask = std::uint64_t{1} << (b & 63);
    if (v)
      words_[b >> 6] |= mask;
    else
      words_[b >> 6] &= ~mask;
  }
  void flip(int b) {
    check(b);
    words_[b >> 6] ^= std::uint64_t{1} << (b & 63);
  }

  /// Fixed DOFs report active.
  bool dof_active(DofIndex n) const {
    const int b = param_->bit_of(n);
    return b < 0 || bit(b);
  }
  void flip_dof(DofIndex n) {
    const int b = param_->bit_of(n);
    if (b < 0) throw InvalidArgument("cannot flip fixed DOF " + std::to_string(n));
    flip(b);
  }

  int count() const {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  /// Active DOFs (set G), ascending; always includes the fixed DOFs.
  DofList active_dofs() const {
    DofList out;
    out.reserve(static_cast<std::size_t>(count()) + param_->fixed().size());
    for (int n = 0; n < n_dof(); ++n)
      if (dof_active(n)) out.push_back(n);
    return out;
  }

  bool same_parameterization(const Gene& o) const {
    return param_ == o.param_ || (param_ && o.param_ && *param_ == *o.param_);
  }

  friend bool operator==(const Gene& a, const Gene& b) {
    return a.same_parameterization(b) && a.words_ == b.words_;
  }
  friend bool operator<(const Gene& a, const Gene& b) { return a.words_ < b.words_; }

 private:
  void check(int b) const {
    if (b < 0 || b >= n_opt()) throw InvalidArgument("gene bit " + std::to_string(b) + " out of range");
  }
  void trim() {
    const int rem = n_opt() & 63;
    if (rem && !words_.empty()) words_.back() &= (std::uint64_t{1} << rem) - 1;
  }

  ParamPtr param_;
  std::vector<std::uint64_t> words_;
};

inline Gene flip(Gene g, int bit) {
  g.flip(bit);
  return g;
}

inline int hamming(const Gene& a, const Gene& b) {
  if (!a.same_parameterization(b)) throw InvalidArgument("genes have different parameterizations");
  int d = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) d += std::popcount(a.words()[i] ^ b.words()[i]);
  return d;
}

/// G0 all, F fixed, D evaluation domain, G active, R = G \ F removable,
/// A = G0 \ G addable. Every list ascending.
struct DofSets {
  DofList G0, F, D, G, R, A;
};

/// An empty d_eval selects the whole plate.
inline DofSets derive_sets(const Gene& gene, const DofList& d_eval = {}) {
  const auto& p = gene.param();
  DofSets s;
  s.G0.resize(static_cast<std::size_t>(p.n_dof()));
  for (int n = 0; n < p.n_dof(); ++n) s.G0[n] = n;
  s.F = p.fixed();
  if (d_eval.empty()) {
    s.D = s.G0;
  } else {
    s.D = d_eval;
    std::sort(s.D.begin(), s.D.end());
    s.D.erase(std::unique(s.D.begin(), s.D.end()), s.D.end());
    if (s.D.front() < 0 || s.D.back() >= p.n_dof())
      throw InvalidArgument("evaluation domain contains an out-of-range DOF");
  }
  for (int n = 0; n < p.n_dof(); ++n) {
    if (gene.dof_active(n)) {
      s.G.push_back(n);
      if (!p.is_fixed(n)) s.R.push_back(n);
    } else {
      s.A.push_back(n);
    }
  }
  return s;
}

/// 2^N_opt, exactly.
inline boost::multiprecision::cpp_int solution_space_size(int n_opt) {
  if (n_opt < 0) throw InvalidArgument("N_opt must be non-negative");
  boost::multiprecision::cpp_int v = 1;
  return v << n_opt;
}
inline boost::multiprecision::cpp_int solution_space_size(const Gene& g) {
  return solution_space_size(g.n_opt());
}

// ---------------------------------------------------------------------------
// Text form:
//   gene n_dof=<N> fixed=<i,j,...>
//   <hex>
// Hex digit j holds bits 4j..4j+3, bit 4j being the least significant.

inline std::string gene_hex(const Gene& g) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  const int n = g.n_opt();
  for (int j = 0; 4 * j < n; ++j) {
    int v = 0;
    for (int b = 0; b < 4 && 4 * j + b < n; ++b) v |= (g.bit(4 * j + b) ? 1 : 0) << b;
    out.push_back(digits[v]);
  }
  return out;
}

inline std::string to_text(const Gene& g) {
  std::ostringstream os;
  os << "gene n_dof=" << g.n_dof() << " fixed=";
  const auto& f = g.param().fixed();
  for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
  os << '\n' << gene_hex(g) << '\n';
  return os.str();
}

inline Gene gene_from_hex(ParamPtr param, const std::string& hex) {
  Gene g(std::move(param));
  const int n = g.n_opt();
  if (static_cast<int>(hex.size()) != (n + 3) / 4)
    throw FormatError(FormatError::Kind::malformed, "gene hex has " + std::to_string(hex.size()) +
                                                        " digits, expected " + std::to_string((n + 3) / 4));
  for (int j = 0; j < static_cast<int>(hex.size()); ++j) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(hex[j])));
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else
      throw FormatError(FormatError::Kind::malformed, "invalid hex digit in gene");
    for (int b = 0; b < 4; ++b) {
      const bool on = (v >> b) & 1;
      if (4 * j + b < n)
        g.set(4 * j + b, on);
      else if (on)
        throw FormatError(FormatError::Kind::malformed, "gene has bits set beyond N_opt");
    }
  }
  return g;
}

/// Parses the text form. When `expected` is given the header must match it
/// and the returned gene shares that parameterization.
inline Gene gene_from_text(const std::string& text, const ParamPtr& expected = nullptr) {
  std::istringstream in(text);
  std::string word, hex;
  int n_dof = -1;
  DofList fixed;
  bool have_fixed = false;
  if (!(in >> word) || word != "gene") throw FormatError(FormatError::Kind::malformed, "missing gene header");
  std::string line;
  std::getline(in, line);
  std::istringstream hs(line);
  while (hs >> word) {
    if (word.rfind("n_dof=", 0) == 0) {
      try {
        n_dof = std::stoi(word.substr(6));
      } catch (const std::exception&) {
        throw FormatError(FormatError::Kind::malformed, "bad n_dof in gene header");
      }
    } else if (word.rfind("fixed=", 0) == 0) {
      have_fixed = true;
      std::stringstream fs(word.substr(6));
      std::string item;
      while (std::getline(fs, item, ','))
        if (!item.empty()) {
          try {
            fixed.push_back(std::stoi(item));
          } catch (const std::exception&) {
            throw FormatError(FormatError::Kind::malformed, "bad fixed list in gene header");
          }
        }
    } else {
      throw FormatError(FormatError::Kind::malformed, "unknown gene header field '" + word + "'");
    }
  }
  if (n_dof < 1 || !have_fixed) throw FormatError(FormatError::Kind::malformed, "incomplete gene header");
  if (!(in >> hex)) hex.clear();
  ParamPtr param = make_parameterization(n_dof, fixed);
  if (expected) {
    if (!(*expected == *param)) throw InvalidArgument("gene header does not match the operator set");
    param = expected;
  }
  return gene_from_hex(param, hex);
}

}  // namespace momtopo
