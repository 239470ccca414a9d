#include "nspda/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "nspda/errors.hpp"

namespace nspda {

int Dataset::max_length() const {
  std::size_t m = 0;
  for (const auto& s : samples) m = std::max(m, s.tokens.size());
  return static_cast<int>(m);
}

namespace {

int snap(int target, int minimum, bool even) {
  int t = std::max(target, minimum);
  if ((t % 2 == 0) != even) t -= 1;
  if (t < minimum) t = minimum;
  return t;
}

std::string positive_anbn(int target, Rng&) {
  const int len = snap(target, 2, /*even=*/true);
  const int n = len / 2;
  return std::string(static_cast<std::size_t>(n), 'a') +
         std::string(static_cast<std::size_t>(n), 'b');
}

std::string positive_palindrome(int target, Rng& rng) {
  const int len = snap(target, 3, /*even=*/false);
  const int half = (len - 1) / 2;
  std::string w;
  for (int i = 0; i < half; ++i) w.push_back(rng.sign() > 0 ? 'a' : 'b');
  std::string out = w;
  out.push_back('c');
  out.append(w.rbegin(), w.rend());
  return out;
}

std::string positive_anbncbmam(int target, Rng& rng) {
  const int len = snap(target, 5, /*even=*/false);
  const int half = (len - 1) / 2;  // n + m
  const int n = static_cast<int>(rng.uniform_int(1, half - 1));
  const int m = half - n;
  std::string out(static_cast<std::size_t>(n), 'a');
  out.append(static_cast<std::size_t>(n), 'b');
  out.push_back('c');
  out.append(static_cast<std::size_t>(m), 'b');
  out.append(static_cast<std::size_t>(m), 'a');
  return out;
}

std::string positive_anmbncm(int target, Rng& rng) {
  const int len = snap(target, 4, /*even=*/true);
  const int half = len / 2;  // n + m
  const int n = static_cast<int>(rng.uniform_int(1, half - 1));
  const int m = half - n;
  std::string out(static_cast<std::size_t>(n + m), 'a');
  out.append(static_cast<std::size_t>(n), 'b');
  out.append(static_cast<std::size_t>(m), 'c');
  return out;
}

std::string positive_dyck2(int target, Rng& rng) {
  const int len = snap(target, 2, /*even=*/true);
  std::string out;
  std::string open;
  for (int i = 0; i < len; ++i) {
    const int remaining = len - i;
    const bool must_open = open.empty();
    const bool must_close = static_cast<int>(open.size()) == remaining;
    bool do_open;
    if (must_open) {
      do_open = true;
    } else if (must_close) {
      do_open = false;
    } else {
      do_open = rng.sign() > 0;
    }
    if (do_open) {
      const char c = rng.sign() > 0 ? '(' : '[';
      out.push_back(c);
      open.push_back(c);
    } else {
      out.push_back(open.back() == '(' ? ')' : ']');
      open.pop_back();
    }
  }
  return out;
}

}  // namespace

std::string sample_positive(const PdaSpec& spec, int target_len, Rng& rng) {
  if (spec.name == "anbn") return positive_anbn(target_len, rng);
  if (spec.name == "palindrome") return positive_palindrome(target_len, rng);
  if (spec.name == "anbncbmam") return positive_anbncbmam(target_len, rng);
  if (spec.name == "anmbncm") return positive_anmbncm(target_len, rng);
  if (spec.name == "dyck2") return positive_dyck2(target_len, rng);
  throw std::invalid_argument("no generator for grammar: " + spec.name);
}

Dataset sample_dataset(const PdaSpec& spec, int n_pos, int n_neg, int len_low,
                       int len_high, std::uint64_t seed) {
  if (n_pos <= 0 || n_neg <= 0) throw std::invalid_argument("counts must be positive");
  if (len_low < 1 || len_low > len_high) throw std::invalid_argument("bad length bounds");

  Rng rng(seed);
  Dataset out;
  out.grammar_id = spec.name;
  out.seed = seed;

  std::unordered_set<std::string> used;
  std::vector<std::string> positives;
  const long long budget = 100LL * (n_pos + n_neg);
  long long attempts = 0;
  auto spend = [&](const char* phase) {
    if (++attempts > budget) {
      throw GenerationExhausted(std::string("dataset generation exhausted during ") +
                                phase + " sampling for " + spec.name);
    }
  };

  // Counted languages run out of distinct members inside a length band long
  // before production-scale counts are reached; after a long streak of
  // duplicate draws, positives are allowed to repeat. Negatives never repeat.
  constexpr int kDupStreakLimit = 200;
  int dup_streak = 0;
  bool positives_exhausted = false;
  while (static_cast<int>(positives.size()) < n_pos) {
    spend("positive");
    const int target = static_cast<int>(rng.uniform_int(len_low, len_high));
    std::string s = sample_positive(spec, target, rng);
    if (!pda_accepts(spec, s)) {
      throw std::logic_error("generated positive rejected by the machine: " + s);
    }
    if (used.insert(s).second) {
      positives.push_back(std::move(s));
      dup_streak = 0;
    } else if (positives_exhausted) {
      positives.push_back(std::move(s));
    } else if (++dup_streak >= kDupStreakLimit) {
      positives_exhausted = true;
    }
  }
  for (const auto& s : positives) out.samples.push_back({s, 1});

  const std::string& sigma = spec.input_alphabet.symbols();
  auto random_token = [&] { return sigma[rng.index(sigma.size())]; };

  auto uniform_negative = [&]() -> std::string {
    const int len = static_cast<int>(rng.uniform_int(len_low, len_high));
    std::string s;
    for (int i = 0; i < len; ++i) s.push_back(random_token());
    return s;
  };
  auto perturbed_negative = [&]() -> std::string {
    std::string s = positives[rng.index(positives.size())];
    const int kind = static_cast<int>(rng.uniform_int(0, 2));
    if (kind == 0) {  // substitute
      const std::size_t i = rng.index(s.size());
      char c = random_token();
      while (c == s[i]) c = random_token();
      s[i] = c;
    } else if (kind == 1) {  // insert
      const std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, (long long)s.size()));
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(i), random_token());
    } else {  // delete
      if (s.size() < 2) return s;  // caller re-verifies and retries
      s.erase(s.begin() + static_cast<std::ptrdiff_t>(rng.index(s.size())));
    }
    return s;
  };

  const int n_uniform = n_neg / 2;
  int have = 0;
  dup_streak = 0;
  bool perturbs_exhausted = false;
  while (have < n_neg) {
    spend("negative");
    const bool perturb = have >= n_uniform && !perturbs_exhausted;
    std::string s = perturb ? perturbed_negative() : uniform_negative();
    if (s.empty() || pda_accepts(spec, s)) continue;
    if (!used.insert(s).second) {
      // the single-edit pool around few distinct positives can dry up
      if (perturb && ++dup_streak >= kDupStreakLimit) perturbs_exhausted = true;
      continue;
    }
    dup_streak = 0;
    out.samples.push_back({std::move(s), 0});
    ++have;
  }

  // seeded shuffle so curriculum slices see both classes
  for (std::size_t i = out.samples.size(); i > 1; --i) {
    std::swap(out.samples[i - 1], out.samples[rng.index(i)]);
  }
  return out;
}

Dataset curriculum_slice(const Dataset& data, int max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  Dataset out;
  out.grammar_id = data.grammar_id;
  out.seed = data.seed;
  for (const auto& s : data.samples) {
    if (static_cast<int>(s.tokens.size()) <= max_len) out.samples.push_back(s);
  }
  return out;
}

std::string dataset_to_string(const Dataset& data) {
  std::ostringstream os;
  os << "#grammar=" << data.grammar_id << " seed=" << data.seed
     << " n=" << data.samples.size() << '\n';
  for (const auto& s : data.samples) {
    os << s.label << '\t';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) os << ' ';
      os << s.tokens[i];
    }
    os << '\n';
  }
  return os.str();
}

Dataset dataset_from_string(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("#grammar=", 0) != 0) {
    throw std::invalid_argument("dataset text missing header");
  }
  Dataset out;
  {
    std::istringstream hs(line.substr(1));
    std::string field;
    while (hs >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = field.substr(0, eq);
      const std::string val = field.substr(eq + 1);
      if (key == "grammar") out.grammar_id = val;
      if (key == "seed") out.seed = std::stoull(val);
    }
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::invalid_argument("dataset line missing tab: " + line);
    LabeledString s;
    s.label = std::stoi(line.substr(0, tab));
    for (std::size_t i = tab + 1; i < line.size(); ++i) {
      if (line[i] != ' ') s.tokens.push_back(line[i]);
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << dataset_to_string(data);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return dataset_from_string(buf.str());
}

}  // namespace nspda
