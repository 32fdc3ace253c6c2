#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcr {

using NodeId = int;

/// Sorted, duplicate-free list of variable (or latent) indices.
using Scope = std::vector<int>;

/// Value per variable; kMissing marks a variable left unobserved.
using Assignment = std::vector<int>;
inline constexpr int kMissing = -1;

inline constexpr double kWeightTolerance = 1e-9;
inline constexpr std::size_t kDefaultTableBudget = 10'000'000;

/// Pipeline stage an error originates from; the CLI reports it verbatim.
enum class Stage { parse, structure, labelling, table, assembly, grammar, io, usage };

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::parse: return "parse";
    case Stage::structure: return "structure";
    case Stage::labelling: return "labelling";
    case Stage::table: return "table";
    case Stage::assembly: return "assembly";
    case Stage::grammar: return "grammar";
    case Stage::io: return "io";
    case Stage::usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Stage stage, const std::string& what) : std::runtime_error(what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

/// Raised when a table or circuit would exceed the configured entry budget.
class BudgetExceeded : public Error {
 public:
  explicit BudgetExceeded(const std::string& what) : Error(Stage::table, what) {}
};

namespace scope {

inline Scope make(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline Scope unite(const Scope& a, const Scope& b) {
  Scope out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline Scope intersect(const Scope& a, const Scope& b) {
  Scope out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline Scope subtract(const Scope& a, const Scope& b) {
  Scope out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool disjoint(const Scope& a, const Scope& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    if (*i < *j) ++i; else ++j;
  }
  return true;
}

inline bool contains(const Scope& s, int x) { return std::binary_search(s.begin(), s.end(), x); }

inline bool is_subset(const Scope& sub, const Scope& sup) {
  return std::includes(sup.begin(), sup.end(), sub.begin(), sub.end());
}

/// True when the scope is {a, a+1, ..., b}.
inline bool is_interval(const Scope& s) {
  return !s.empty() && s.back() - s.front() + 1 == static_cast<int>(s.size());
}

}  // namespace scope

/// Calls fn(assignment) for every joint value of the given domains in
/// lexicographic order (index 0 varies slowest).
inline void for_each_assignment(const std::vector<int>& domains,
                                const std::function<void(const Assignment&)>& fn) {
  Assignment x(domains.size(), 0);
  for (int d : domains)
    if (d <= 0) return;
  while (true) {
    fn(x);
    int k = static_cast<int>(x.size()) - 1;
    while (k >= 0 && ++x[k] == domains[k]) x[k--] = 0;
    if (k < 0) return;
  }
}

inline double state_space_size(const std::vector<int>& domains) {
  double total = 1.0;
  for (int d : domains) total *= d;
  return total;
}

}  // namespace pcr
