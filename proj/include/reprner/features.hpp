#pragma once

// Token attributes for the CRF: the lexical baseline over a +-window context
// plus one family per word-representation resource.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "brown.hpp"
#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "kmeans.hpp"
#include "prototypes.hpp"
#include "transforms.hpp"
#include "utf8.hpp"

namespace reprner {

enum class Family { baseline, DE, BI_A, BI_B, BI_C, SE, NNSE, CE, Proto, BC };

inline constexpr std::array<Family, 10> kAllFamilies = {
    Family::baseline, Family::DE, Family::BI_A, Family::BI_B, Family::BI_C,
    Family::SE,       Family::NNSE, Family::CE, Family::Proto, Family::BC};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::baseline: return "baseline";
    case Family::DE: return "DE";
    case Family::BI_A: return "BI_A";
    case Family::BI_B: return "BI_B";
    case Family::BI_C: return "BI_C";
    case Family::SE: return "SE";
    case Family::NNSE: return "NNSE";
    case Family::CE: return "CE";
    case Family::Proto: return "Proto";
    case Family::BC: return "BC";
  }
  return "?";
}

inline Family parse_family(std::string_view name) {
  for (Family f : kAllFamilies)
    if (family_name(f) == name) return f;
  fail_usage("unknown feature family '" + std::string(name) + "'");
}

struct FeatureTemplateSet {
  int window = 1;
  std::set<Family> enabled = {Family::baseline};
  double de_scale = 1.0;
  /// Empty: Brown features use the full path.
  std::vector<std::size_t> brown_prefix_lengths;
  bool ce_compound = true;

  bool has(Family f) const { return enabled.count(f) > 0; }

  void validate() const {
    if (window < 0) fail_usage("feature window must be >= 0");
    if (enabled.empty()) fail_usage("no feature family enabled");
    if (!std::isfinite(de_scale)) fail_usage("de_scale must be finite");
  }
};

struct Attribute {
  std::string name;
  double value = 1.0;

  bool operator==(const Attribute&) const = default;
  auto operator<=>(const Attribute&) const = default;
};

struct AttributedSentence {
  std::vector<std::vector<Attribute>> tokens;
  std::vector<std::string> labels;

  std::size_t size() const { return tokens.size(); }
};

/// Borrowed resources; a family may only be enabled when its resource is set.
struct FeatureResources {
  const EmbeddingTable* embeddings = nullptr;  // DE, BI_*, Proto
  const SparseVectors* sparse = nullptr;       // SE
  const SparseVectors* nnse = nullptr;         // NNSE
  const KMeansModel* kmeans = nullptr;         // CE
  const PrototypeTable* prototypes = nullptr;  // Proto
  const BrownModel* brown = nullptr;           // BC
};

inline void check_resources(const FeatureTemplateSet& templates, const FeatureResources& r) {
  auto need = [&](Family f, const void* p) {
    if (templates.has(f) && !p)
      fail_data("feature family " + std::string(family_name(f)) + " is enabled but its " +
                "resource is missing");
  };
  need(Family::DE, r.embeddings);
  need(Family::BI_A, r.embeddings);
  need(Family::BI_B, r.embeddings);
  need(Family::BI_C, r.embeddings);
  need(Family::SE, r.sparse);
  need(Family::NNSE, r.nnse);
  need(Family::CE, r.kmeans);
  need(Family::Proto, r.prototypes);
  need(Family::Proto, r.embeddings);
  need(Family::BC, r.brown);
}

namespace detail {

inline std::string offset_tag(int o) { return "[" + std::to_string(o) + "]"; }

/// "name=value" -> "name[o]=value".
inline std::string tag_attribute(std::string_view attr, const std::string& tag) {
  const auto eq = attr.find('=');
  if (eq == std::string_view::npos) return std::string(attr) + tag;
  return std::string(attr.substr(0, eq)) + tag + std::string(attr.substr(eq));
}

inline void baseline_attributes(const Token& tok, const std::string& tag,
                                std::vector<Attribute>& out) {
  const auto& w = tok.surface;
  const std::size_t len = utf8::length(w);
  out.push_back({"w" + tag + "=" + w});
  if (tok.pos) out.push_back({"pos" + tag + "=" + *tok.pos});
  out.push_back({"len" + tag + "=" + std::to_string(len)});
  for (std::size_t n = 1; n <= 4 && n <= len; ++n) {
    out.push_back({"pre" + std::to_string(n) + tag + "=" + utf8::prefix(w, n)});
    out.push_back({"suf" + std::to_string(n) + tag + "=" + utf8::suffix(w, n)});
  }
  for (std::size_t n = 1; n <= 3 && n <= len; ++n) {
    out.push_back({"hng" + std::to_string(n) + tag + "=" + utf8::prefix(w, n)});
    out.push_back({"tng" + std::to_string(n) + tag + "=" + utf8::suffix(w, n)});
  }
}

}  // namespace detail

/// Materializes the attributes of every token. For each offset o in
/// [-window, window] the lexical baseline is `w[o]=`, `pos[o]=`, `len[o]=`,
/// `pre1..4[o]=`, `suf1..4[o]=`, `hng1..3[o]=`, `tng1..3[o]=`; positions past
/// the sentence edge emit only `w[o]=<BOS>` / `w[o]=<EOS>`. Words missing
/// from an embedding-derived resource get a single `oov[o]=1` instead.
/// Prototype attributes are emitted at offset 0 only.
inline AttributedSentence extract_features(const Sentence& sentence,
                                           const FeatureTemplateSet& templates,
                                           const FeatureResources& res) {
  templates.validate();
  check_resources(templates, res);
  const auto& toks = sentence.tokens;
  const int n = static_cast<int>(toks.size());
  AttributedSentence out;
  out.tokens.resize(toks.size());
  out.labels.reserve(toks.size());
  for (const auto& t : toks) out.labels.push_back(t.label);

  const bool any_representation =
      std::any_of(templates.enabled.begin(), templates.enabled.end(),
                  [](Family f) { return f != Family::baseline; });
  char buf[32];

  for (int i = 0; i < n; ++i) {
    auto& attrs = out.tokens[static_cast<std::size_t>(i)];
    for (int o = -templates.window; o <= templates.window; ++o) {
      const std::string tag = detail::offset_tag(o);
      const int j = i + o;
      if (j < 0 || j >= n) {
        if (templates.has(Family::baseline) || any_representation)
          attrs.push_back({"w" + tag + "=" + (j < 0 ? "<BOS>" : "<EOS>")});
        continue;
      }
      const Token& tok = toks[static_cast<std::size_t>(j)];
      if (templates.has(Family::baseline)) detail::baseline_attributes(tok, tag, attrs);

      bool oov = false;
      std::optional<std::span<const float>> vec;
      if (res.embeddings) vec = res.embeddings->lookup(tok.surface);

      if (templates.has(Family::DE)) {
        if (vec) {
          for (std::size_t d = 0; d < vec->size(); ++d)
            attrs.push_back({"emb" + tag + std::to_string(d),
                             static_cast<double>((*vec)[d]) * templates.de_scale});
        } else {
          oov = true;
        }
      }
      for (auto [fam, method] : {std::pair{Family::BI_A, BinarizeMethod::A},
                                 std::pair{Family::BI_B, BinarizeMethod::B},
                                 std::pair{Family::BI_C, BinarizeMethod::C}}) {
        if (!templates.has(fam)) continue;
        if (!vec) {
          oov = true;
          continue;
        }
        const auto sym = binarize(*vec, method);
        const std::string prefix = std::string("bin") + method_letter(method) + tag;
        for (std::size_t d = 0; d < sym.size(); ++d)
          if (sym[d] != Ternary::zero)
            attrs.push_back({prefix + std::to_string(d) + "=" + std::string(ternary_symbol(sym[d]))});
      }
      for (auto [fam, table] : {std::pair{Family::SE, res.sparse}, std::pair{Family::NNSE, res.nnse}}) {
        if (!templates.has(fam)) continue;
        const auto* entries = table->find(tok.surface);
        if (!entries) {
          oov = true;
          continue;
        }
        const std::string prefix = (fam == Family::SE ? "sp" : "nnsp") + tag;
        for (const auto& [d, v] : *entries) {
          std::snprintf(buf, sizeof buf, "%u", d);
          attrs.push_back({prefix + buf, v});
        }
      }
      if (templates.has(Family::CE)) {
        ClusterContext ctx;
        if (o == 0 && templates.ce_compound) {
          if (j > 0) ctx.prev = toks[static_cast<std::size_t>(j - 1)].surface;
          if (j + 1 < n) ctx.next = toks[static_cast<std::size_t>(j + 1)].surface;
        }
        for (const auto& a : cluster_features(*res.kmeans, tok.surface, templates.ce_compound, ctx))
          attrs.push_back({detail::tag_attribute(a, tag)});
      }
      if (templates.has(Family::BC))
        for (const auto& a : brown_features(*res.brown, tok.surface, templates.brown_prefix_lengths))
          attrs.push_back({detail::tag_attribute(a, tag)});
      if (templates.has(Family::Proto) && o == 0) {
        if (vec) {
          for (const auto& a : assign_prototypes(*res.prototypes, *res.embeddings, tok.surface))
            attrs.push_back({detail::tag_attribute(a, tag)});
        } else {
          oov = true;
        }
      }
      if (oov) attrs.push_back({"oov" + tag + "=1"});
    }
  }
  return out;
}

inline std::vector<AttributedSentence> extract_corpus(const Corpus& corpus,
                                                      const FeatureTemplateSet& templates,
                                                      const FeatureResources& res) {
  std::vector<AttributedSentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) out.push_back(extract_features(s, templates, res));
  return out;
}

// ---------------------------------------------------------------------------
// CRFsuite-style attribute files: "<label>\t<attr>[:<value>]\t..." per token,
// blank line between sentences. ':' and '\' in names are backslash-escaped.

namespace detail {

inline std::string escape_attribute(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    if (c == ':' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

inline std::string serialize_attributes(const std::vector<AttributedSentence>& data) {
  std::string out;
  char buf[40];
  for (const auto& s : data) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      out += s.labels.empty() ? std::string("O") : s.labels[t];
      for (const auto& a : s.tokens[t]) {
        out += '\t';
        out += detail::escape_attribute(a.name);
        if (a.value != 1.0) {
          std::snprintf(buf, sizeof buf, ":%.17g", a.value);
          out += buf;
        }
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

inline std::vector<AttributedSentence> parse_attributes(std::string_view text) {
  std::vector<AttributedSentence> data;
  AttributedSentence cur;
  std::size_t line_no = 0, start = 0;
  auto flush = [&] {
    if (!cur.tokens.empty()) data.push_back(std::move(cur));
    cur = AttributedSentence{};
  };
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const bool last = end == text.size();
    start = end + 1;
    ++line_no;
    if (line.empty()) {
      flush();
      if (last) break;
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t f = 0;
    while (f <= line.size()) {
      std::size_t tab = line.find('\t', f);
      if (tab == std::string_view::npos) tab = line.size();
      fields.push_back(line.substr(f, tab - f));
      f = tab + 1;
    }
    cur.labels.emplace_back(fields[0]);
    auto& attrs = cur.tokens.emplace_back();
    for (std::size_t k = 1; k < fields.size(); ++k) {
      if (fields[k].empty()) continue;
      Attribute a;
      std::size_t p = 0;
      bool has_value = false;
      for (; p < fields[k].size(); ++p) {
        const char c = fields[k][p];
        if (c == '\\' && p + 1 < fields[k].size()) {
          a.name += fields[k][++p];
        } else if (c == ':') {
          has_value = true;
          break;
        } else {
          a.name += c;
        }
      }
      if (has_value) {
        const auto v = fields[k].substr(p + 1);
        auto r = std::from_chars(v.data(), v.data() + v.size(), a.value);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(a.value))
          fail_data("line " + std::to_string(line_no) + ": bad attribute value '" +
                    std::string(v) + "'");
      }
      if (a.name.empty()) fail_data("line " + std::to_string(line_no) + ": empty attribute name");
      attrs.push_back(std::move(a));
    }
    if (last) break;
  }
  flush();
  return data;
}

}  // namespace reprner
