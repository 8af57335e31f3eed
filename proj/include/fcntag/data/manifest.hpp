#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fcntag/error.hpp"
#include "fcntag/matrix.hpp"

namespace fcntag::data {

enum class Split { train, valid, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid" || s == "validation" || s == "val") return Split::valid;
  if (s == "test") return Split::test;
  throw Error(ErrorKind::contract, "unknown split '" + std::string(s) + "' (expected train, valid or test)");
}

struct ManifestEntry {
  std::string clip_id;
  std::string path;  // as written; relative paths resolve against the manifest directory
  Split split = Split::train;
  std::vector<std::string> tags;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const {
    std::filesystem::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
  }
  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].split == s) out.push_back(i);
    return out;
  }
};

namespace detail {

/// Splits one CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

inline std::vector<std::string> split_tags(const std::string& s) {
  std::vector<std::string> tags;
  std::stringstream ss(s);
  std::string t;
  while (std::getline(ss, t, '|'))
    if (!t.empty()) tags.push_back(t);
  return tags;
}

inline std::string join_tags(const std::vector<std::string>& tags) {
  std::string s;
  for (const auto& t : tags) s += (s.empty() ? "" : "|") + t;
  return s;
}

/// Checks unique clip ids and, when asked, that every path exists.
inline void validate(const Manifest& m, bool check_paths) {
  std::set<std::string> seen;
  for (const auto& e : m.entries) {
    if (e.clip_id.empty()) throw Error(ErrorKind::invalid_input, "manifest: empty clip_id");
    if (!seen.insert(e.clip_id).second) throw Error(ErrorKind::invalid_input, "manifest: duplicate clip_id '" + e.clip_id + "'");
    if (check_paths && !std::filesystem::exists(m.resolve(e)))
      throw Error(ErrorKind::io, "manifest: clip '" + e.clip_id + "' path not found: " + m.resolve(e).string());
  }
}

inline Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir, const std::string& origin) {
  Manifest m;
  m.base_dir = base_dir;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::invalid_input, origin + ": empty manifest");
  auto header = detail::split_csv(line);
  auto col = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::invalid_input, origin + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = col("clip_id"), c_path = col("path"), c_split = col("split"), c_tags = col("tags");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = detail::split_csv(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::invalid_input, origin + ":" + std::to_string(line_no) + ": expected " +
                                                std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    ManifestEntry e;
    e.clip_id = f[c_id];
    e.path = f[c_path];
    try {
      e.split = parse_split(f[c_split]);
    } catch (const Error& err) {
      throw Error(ErrorKind::invalid_input, origin + ":" + std::to_string(line_no) + ": " + err.what());
    }
    e.tags = split_tags(f[c_tags]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path, bool check_paths = true) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path.string());
  auto m = parse_manifest(in, path.parent_path(), path.string());
  validate(m, check_paths);
  return m;
}

inline std::string manifest_csv(const Manifest& m) {
  std::string out = "clip_id,path,split,tags\n";
  for (const auto& e : m.entries)
    out += detail::csv_field(e.clip_id) + "," + detail::csv_field(e.path) + "," + to_string(e.split) + "," +
           detail::csv_field(join_tags(e.tags)) + "\n";
  return out;
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write manifest " + path.string());
  out << manifest_csv(m);
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

struct TagVocabulary {
  std::vector<std::string> tags;
  std::vector<std::size_t> counts;

  std::size_t size() const { return tags.size(); }
  std::ptrdiff_t index_of(const std::string& tag) const {
    auto it = std::find(tags.begin(), tags.end(), tag);
    return it == tags.end() ? -1 : it - tags.begin();
  }
};

/// Top-`k` tags by training-split count, ties broken lexicographically.
/// `k == 0` keeps every tag seen in training.
inline TagVocabulary build_vocab(const Manifest& m, std::size_t k) {
  std::map<std::string, std::size_t> counts;
  std::size_t n_train = 0;
  for (const auto& e : m.entries) {
    if (e.split != Split::train) continue;
    ++n_train;
    std::set<std::string> unique(e.tags.begin(), e.tags.end());
    for (const auto& t : unique) ++counts[t];
  }
  if (n_train == 0) throw Error(ErrorKind::invalid_request, "build_vocab: training split is empty");
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (k == 0) k = sorted.size();
  if (sorted.size() < k)
    throw Error(ErrorKind::invalid_request, "build_vocab: asked for " + std::to_string(k) + " tags but training has " +
                                                std::to_string(sorted.size()));
  TagVocabulary v;
  for (std::size_t i = 0; i < k; ++i) {
    v.tags.push_back(sorted[i].first);
    v.counts.push_back(sorted[i].second);
  }
  return v;
}

struct SplitLabels {
  LabelMatrix labels;
  std::vector<std::size_t> entry_index;  // manifest row of each label row
};

/// Binary labels for one split. With `drop_untagged`, clips carrying none of
/// the vocabulary's tags are left out.
inline SplitLabels label_matrix(const Manifest& m, const TagVocabulary& vocab, Split split, bool drop_untagged = false) {
  SplitLabels out;
  out.labels.cols = vocab.size();
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    if (e.split != split) continue;
    std::vector<std::uint8_t> row(vocab.size(), 0);
    bool any = false;
    for (const auto& t : e.tags) {
      auto j = vocab.index_of(t);
      if (j >= 0) {
        row[static_cast<std::size_t>(j)] = 1;
        any = true;
      }
    }
    if (drop_untagged && !any) continue;
    out.labels.values.insert(out.labels.values.end(), row.begin(), row.end());
    out.entry_index.push_back(i);
  }
  out.labels.rows = out.entry_index.size();
  return out;
}

inline SplitLabels label_matrix(const Manifest& m, const TagVocabulary& vocab, std::string_view split,
                                bool drop_untagged = false) {
  return label_matrix(m, vocab, parse_split(split), drop_untagged);
}

inline std::size_t unique_rows(const LabelMatrix& l) {
  std::set<std::vector<std::uint8_t>> rows;
  for (std::size_t r = 0; r < l.rows; ++r)
    rows.emplace(l.values.begin() + static_cast<std::ptrdiff_t>(r * l.cols),
                 l.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * l.cols));
  return rows.size();
}

}  // namespace fcntag::data
