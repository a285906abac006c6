#include "moje/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "moje/error.hpp"

namespace moje {
namespace {

using nlohmann::json;

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open dataset '{}'", path.string()));
  return in;
}

LabeledExample make_example(std::string text, std::string_view label,
                            std::optional<std::string> category,
                            std::optional<std::string> source) {
  LabeledExample ex;
  ex.text = std::move(text);
  ex.label = parse_label(label);
  if (category && !category->empty()) ex.category = std::move(category);
  if (source && !source->empty()) ex.source = std::move(source);
  validate(ex);
  return ex;
}

std::optional<std::string> optional_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw InputError(fmt::format("field '{}' must be a string", key));
  return it->get<std::string>();
}

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// newlines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& fields) {
    fields.clear();
    if (in_.peek() == std::char_traits<char>::eof()) return false;
    ++record_;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (;;) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) {
        if (quoted) throw InputError(fmt::format("record {}: unterminated quoted field", record_));
        break;
      }
      any = true;
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          field.push_back(static_cast<char>(c));
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        break;
      } else if (c != '\r') {
        field.push_back(static_cast<char>(c));
      }
    }
    if (any) fields.push_back(std::move(field));
    return true;
  }

  std::size_t record() const { return record_; }

 private:
  std::istream& in_;
  std::size_t record_ = 0;
};

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::jailbreak ? "jailbreak" : "benign";
}

Label parse_label(std::string_view text) {
  const auto s = lower_ascii(text);
  if (s == "jailbreak") return Label::jailbreak;
  if (s == "benign") return Label::benign;
  throw InputError(fmt::format("unknown label '{}'", text));
}

void validate(const LabeledExample& example) {
  if (is_blank(example.text)) throw InputError("example text is empty");
  if (example.category && example.label != Label::jailbreak)
    throw InputError("only jailbreak examples may carry a category");
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      examples.begin(), examples.end(), [label](const auto& e) { return e.label == label; }));
}

std::vector<std::string> Dataset::categories() const {
  std::set<std::string> cats;
  for (const auto& e : examples)
    if (e.category) cats.insert(*e.category);
  return {cats.begin(), cats.end()};
}

Dataset concat(std::string name, const std::vector<Dataset>& parts) {
  Dataset out{std::move(name), {}};
  for (const auto& p : parts) out.examples.insert(out.examples.end(), p.examples.begin(), p.examples.end());
  return out;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  Dataset ds{path.stem().string(), {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    try {
      const json record = json::parse(line);
      if (!record.is_object()) throw InputError("record is not an object");
      auto text = record.find("text");
      auto label = record.find("label");
      if (text == record.end() || !text->is_string()) throw InputError("missing string field 'text'");
      if (label == record.end() || !label->is_string()) throw InputError("missing string field 'label'");
      ds.examples.push_back(make_example(text->get<std::string>(), label->get<std::string>(),
                                         optional_string(record, "category"),
                                         optional_string(record, "source")));
    } catch (const json::exception& e) {
      throw InputError(fmt::format("{}:{}: malformed record: {}", path.string(), lineno, e.what()));
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  if (in.bad()) throw InputError(fmt::format("read error on '{}'", path.string()));
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  CsvReader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw InputError(fmt::format("{}: empty CSV file", path.string()));
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
  int text_col = -1, label_col = -1, category_col = -1, source_col = -1;
  for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
    const auto name = lower_ascii(fields[i]);
    if (name == "text") text_col = i;
    if (name == "label") label_col = i;
    if (name == "category") category_col = i;
    if (name == "source") source_col = i;
  }
  if (text_col < 0 || label_col < 0)
    throw InputError(fmt::format("{}: header must name 'text' and 'label' columns", path.string()));
  Dataset ds{path.stem().string(), {}};
  while (reader.next(fields)) {
    if (fields.empty() || (fields.size() == 1 && is_blank(fields[0]))) continue;
    auto column = [&](int col) -> std::optional<std::string> {
      if (col < 0 || col >= static_cast<int>(fields.size())) return std::nullopt;
      return fields[col];
    };
    try {
      auto text = column(text_col);
      auto label = column(label_col);
      if (!text || !label) throw InputError("missing text or label column");
      ds.examples.push_back(
          make_example(std::move(*text), *label, column(category_col), column(source_col)));
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}: record {}: {}", path.string(), reader.record(), e.what()));
    }
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (lower_ascii(path.extension().string()) == ".csv") return load_csv(path);
  return load_jsonl(path);
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& e : ds.examples) {
    json record = {{"text", e.text}, {"label", to_string(e.label)}};
    if (e.category) record["category"] = *e.category;
    if (e.source) record["source"] = *e.source;
    out << record.dump() << '\n';
  }
  if (!out) throw InputError(fmt::format("write failed on '{}'", path.string()));
}

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw PreconditionError("test_fraction must lie strictly between 0 and 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw PreconditionError("val_fraction must lie strictly between 0 and 1");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

HoldoutSplit split_holdout(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  if (ds.empty()) throw PreconditionError("cannot split an empty dataset");

  std::map<std::pair<Label, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& e = ds.examples[i];
    auto key = spec.stratify ? std::pair{e.label, e.category.value_or("")}
                             : std::pair{Label::benign, std::string{}};
    strata[key].push_back(i);
  }

  std::vector<std::size_t> train, val, test;
  std::uint64_t ordinal = 0;
  for (const auto& [key, members] : strata) {
    if (spec.stratify && members.size() < 5)
      throw PreconditionError(fmt::format(
          "stratum ({}, '{}') has {} examples; stratified splitting needs at least 5",
          to_string(key.first), key.second, members.size()));
    const auto perm = seeded_permutation(members.size(), derive_seed(spec.seed, ordinal++));
    const auto n = members.size();
    const auto n_test = static_cast<std::size_t>(std::lround(spec.test_fraction * n));
    const auto n_val = static_cast<std::size_t>(std::lround(spec.val_fraction * (n - n_test)));
    for (std::size_t r = 0; r < n; ++r) {
      const auto idx = members[perm[r]];
      if (r < n_test)
        test.push_back(idx);
      else if (r < n_test + n_val)
        val.push_back(idx);
      else
        train.push_back(idx);
    }
  }

  auto gather = [&](std::vector<std::size_t>& idx, const char* suffix) {
    std::sort(idx.begin(), idx.end());
    Dataset out{ds.name + suffix, {}};
    out.examples.reserve(idx.size());
    for (auto i : idx) out.examples.push_back(ds.examples[i]);
    return out;
  };
  return {gather(train, "/train"), gather(val, "/val"), gather(test, "/test")};
}

std::map<std::string, Dataset> partition_by_category(const Dataset& ds) {
  std::map<std::string, Dataset> parts;
  for (const auto& e : ds.examples) {
    if (!e.is_jailbreak()) continue;
    if (!e.category)
      throw PreconditionError(fmt::format("jailbreak example without a category: '{}'",
                                          e.text.substr(0, 60)));
    parts.try_emplace(*e.category, Dataset{ds.name + "/" + *e.category, {}});
  }
  for (const auto& e : ds.examples) {
    if (e.is_jailbreak()) {
      parts[*e.category].examples.push_back(e);
    } else {
      for (auto& [_, part] : parts) part.examples.push_back(e);
    }
  }
  return parts;
}

std::vector<FoldIndices> kfold_indices(const std::vector<Label>& labels, std::size_t k,
                                       std::uint64_t seed) {
  if (k < 2) throw PreconditionError("k-fold needs k >= 2");
  if (k > labels.size())
    throw PreconditionError(fmt::format("k={} exceeds dataset size {}", k, labels.size()));

  // Shuffle within each label, lay the classes end to end and deal the
  // sequence round-robin: every fold gets an even share of each class.
  std::vector<std::size_t> order;
  order.reserve(labels.size());
  for (Label cls : {Label::benign, Label::jailbreak}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    const auto perm = seeded_permutation(members.size(), derive_seed(seed, static_cast<int>(cls)));
    for (auto p : perm) order.push_back(members[p]);
  }
  std::vector<std::size_t> fold_of(labels.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) fold_of[order[pos]] = pos % k;

  std::vector<FoldIndices> folds(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      if (fold_of[i] == f)
        folds[f].val.push_back(i);
      else
        folds[f].train.push_back(i);
    }
  }
  return folds;
}

std::vector<Fold> kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  const auto index_folds = kfold_indices(labels_of(ds), k, seed);
  std::vector<Fold> out;
  out.reserve(k);
  for (std::size_t f = 0; f < index_folds.size(); ++f) {
    Fold fold{{fmt::format("{}/fold{}-train", ds.name, f), {}},
              {fmt::format("{}/fold{}-val", ds.name, f), {}}};
    for (auto i : index_folds[f].train) fold.train.examples.push_back(ds.examples[i]);
    for (auto i : index_folds[f].val) fold.val.examples.push_back(ds.examples[i]);
    out.push_back(std::move(fold));
  }
  return out;
}

std::vector<Label> labels_of(const Dataset& ds) {
  std::vector<Label> y;
  y.reserve(ds.size());
  for (const auto& e : ds.examples) y.push_back(e.label);
  return y;
}

}  // namespace moje
