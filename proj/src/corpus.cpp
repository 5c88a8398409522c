#include "rrl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "rrl/random.hpp"

namespace rrl {

using nlohmann::json;

LabelSet::LabelSet(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    require(!labels_[i].empty(), "label set: empty label string");
    auto [_, inserted] = index_.emplace(labels_[i], static_cast<int>(i));
    require(inserted, "label set: duplicate label '" + labels_[i] + "'");
  }
}

LabelSet LabelSet::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open label file: " + path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  require(!labels.empty(), "label file is empty: " + path);
  return LabelSet(std::move(labels));
}

void LabelSet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write label file: " + path);
  for (const auto& l : labels_) out << l << "\n";
}

int LabelSet::id_of(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? -1 : it->second;
}

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.sentences.size();
  return n;
}

// ----------------------------------------------------------- tokenizer ----

namespace {

bool is_space_codepoint(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// Decodes one UTF-8 codepoint; malformed bytes pass through as single
// codepoints so tokenization never fails on odd input.
std::uint32_t next_codepoint(const std::string& s, std::size_t& i) {
  unsigned char c = s[i];
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = (c >= 0xF0) ? 3 : (c >= 0xE0) ? 2 : (c >= 0xC0) ? 1 : 0;
  if (extra == 0 || i + extra >= s.size()) {
    ++i;
    return c;
  }
  std::uint32_t cp = c & (0x3F >> extra);
  for (int k = 1; k <= extra; ++k) {
    unsigned char cc = s[i + k];
    if ((cc & 0xC0) != 0x80) {
      ++i;
      return c;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void emit_token(const std::string& word, std::vector<std::string>& out) {
  if (word.empty()) return;
  std::size_t begin = 0, end = word.size();
  std::vector<std::string> leading;
  while (begin < end && static_cast<unsigned char>(word[begin]) < 0x80 &&
         is_ascii_punct(word[begin])) {
    leading.push_back(std::string(1, word[begin]));
    ++begin;
  }
  std::vector<std::string> trailing;
  while (end > begin && static_cast<unsigned char>(word[end - 1]) < 0x80 &&
         is_ascii_punct(word[end - 1])) {
    trailing.push_back(std::string(1, word[end - 1]));
    --end;
  }
  for (auto& t : leading) out.push_back(std::move(t));
  if (end > begin) out.push_back(word.substr(begin, end - begin));
  for (auto it = trailing.rbegin(); it != trailing.rend(); ++it)
    out.push_back(std::move(*it));
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text)
    lowered.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(c))));

  std::vector<std::string> tokens;
  std::string word;
  std::size_t i = 0;
  while (i < lowered.size()) {
    std::size_t start = i;
    std::uint32_t cp = next_codepoint(lowered, i);
    if (is_space_codepoint(cp)) {
      emit_token(word, tokens);
      word.clear();
    } else {
      word.append(lowered, start, i - start);
    }
  }
  emit_token(word, tokens);
  return tokens;
}

// ------------------------------------------------------------- loading ----

Corpus load_corpus(const std::string& path, const LabelSet& labels) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open corpus file: " + path);

  Corpus corpus;
  corpus.label_set = labels;
  corpus.name = path;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc_json;
    try {
      doc_json = json::parse(line);
    } catch (const json::exception& e) {
      fail("corpus " + path + " line " + std::to_string(line_no) +
           ": malformed JSON (" + e.what() + ")");
    }
    require(doc_json.contains("doc_id") && doc_json.contains("sentences"),
            "corpus " + path + " line " + std::to_string(line_no) +
                ": missing doc_id or sentences");
    Document doc;
    doc.doc_id = doc_json["doc_id"].get<std::string>();
    for (const auto& s : doc_json["sentences"]) {
      Sentence sent;
      sent.text = s.at("text").get<std::string>();
      std::string label = s.at("label").get<std::string>();
      int id = labels.id_of(label);
      require(id >= 0, "corpus " + path + " line " + std::to_string(line_no) +
                           ": unknown label '" + label + "'");
      sent.label_id = id;
      sent.tokens = tokenize(sent.text);
      require(!sent.tokens.empty(),
              "corpus " + path + " line " + std::to_string(line_no) +
                  ": sentence tokenizes to nothing");
      doc.sentences.push_back(std::move(sent));
    }
    require(!doc.sentences.empty(), "corpus " + path + " line " +
                                        std::to_string(line_no) +
                                        ": empty document");
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty())
    std::cerr << "warning: corpus " << path << " has no documents\n";
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write corpus file: " + path);
  for (const auto& doc : corpus.documents) {
    json sentences = json::array();
    for (const auto& s : doc.sentences)
      sentences.push_back(
          {{"text", s.text}, {"label", corpus.label_set.name(s.label_id)}});
    json line = {{"doc_id", doc.doc_id}, {"sentences", sentences}};
    out << line.dump() << "\n";
  }
}

// ------------------------------------------------------------ splitting ----

std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                double train_frac,
                                                double val_frac,
                                                double test_frac,
                                                std::uint64_t seed) {
  require(train_frac >= 0 && val_frac >= 0 && test_frac >= 0,
          "split: fractions must be non-negative");
  require(std::abs(train_frac + val_frac + test_frac - 1.0) <= 1e-9,
          "split: fractions must sum to 1");

  std::size_t n = corpus.documents.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RandomStream rng(seed);
  rng.shuffle(order);

  const double fracs[3] = {train_frac, val_frac, test_frac};
  std::size_t counts[3];
  double exact[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    exact[i] = fracs[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact[i] + 1e-9));
    assigned += counts[i];
  }
  // Largest remainder for the leftovers; ties go to the earlier split.
  while (assigned < n) {
    int best = -1;
    double best_rem = -1.0;
    for (int i = 0; i < 3; ++i) {
      double rem = exact[i] - static_cast<double>(counts[i]);
      if (fracs[i] > 0 && rem > best_rem + 1e-12) {
        best_rem = rem;
        best = i;
      }
    }
    if (best < 0) best = 0;
    ++counts[best];
    ++assigned;
  }
  if (n > 0)
    for (int i = 0; i < 3; ++i)
      require(!(fracs[i] > 0 && counts[i] == 0),
              "split: a requested split would be empty");

  Corpus parts[3];
  const char* suffix[3] = {"-train", "-val", "-test"};
  std::size_t cursor = 0;
  for (int i = 0; i < 3; ++i) {
    parts[i].label_set = corpus.label_set;
    parts[i].name = corpus.name + suffix[i];
    for (std::size_t k = 0; k < counts[i]; ++k)
      parts[i].documents.push_back(corpus.documents[order[cursor++]]);
  }
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

std::vector<double> label_distribution(const Corpus& corpus) {
  require(corpus.sentence_count() > 0, "label_distribution: empty corpus");
  std::vector<double> counts(corpus.label_set.size(), 0.0);
  double total = 0.0;
  for (const auto& d : corpus.documents)
    for (const auto& s : d.sentences) {
      counts[s.label_id] += 1.0;
      total += 1.0;
    }
  for (double& c : counts) c /= total;
  return counts;
}

// ----------------------------------------------------------- synthesis ----

std::vector<double> zipf_probabilities(int k, double exponent) {
  require(k >= 1, "zipf_probabilities: k >= 1 required");
  require(exponent >= 0.0, "zipf_probabilities: exponent >= 0 required");
  std::vector<double> p(k);
  double z = 0.0;
  for (int r = 0; r < k; ++r) {
    p[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
    z += p[r];
  }
  for (double& v : p) v /= z;
  return p;
}

namespace {

int sample_categorical(RandomStream& rng, const std::vector<double>& p) {
  double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

void validate(const SynthConfig& cfg) {
  require(cfg.n_labels >= 2, "synth: n_labels >= 2 required");
  require(cfg.mean_sentences >= 2, "synth: mean_sentences >= 2 required");
  require(cfg.zipf_exponent >= 0.0, "synth: zipf_exponent >= 0 required");
  require(cfg.n_docs >= 1, "synth: n_docs >= 1 required");
  require(cfg.mean_tokens >= 1, "synth: mean_tokens >= 1 required");
  require(cfg.vocab_per_label >= 1, "synth: vocab_per_label >= 1 required");
  require(cfg.shared_vocab >= 0, "synth: shared_vocab >= 0 required");
  require(cfg.transition_stickiness >= 0.0 && cfg.transition_stickiness <= 1.0,
          "synth: transition_stickiness must be in [0,1]");
}

}  // namespace

Corpus generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  RandomStream rng(cfg.seed);
  std::vector<double> zipf = zipf_probabilities(cfg.n_labels, cfg.zipf_exponent);

  std::vector<std::string> names;
  for (int k = 0; k < cfg.n_labels; ++k)
    names.push_back("role_" + std::to_string(k));

  // Private vocabularies depend only on (label, index) so corpora generated
  // with different seeds still share them; the shared pool is seed-tagged,
  // which is what shifts vocabulary overlap across synthetic domains.
  auto private_token = [](int label, int idx) {
    return "t" + std::to_string(label) + "_" + std::to_string(idx);
  };
  std::string shared_tag = std::to_string(cfg.seed);

  Corpus corpus;
  corpus.label_set = LabelSet(names);
  corpus.name = "synth-" + std::to_string(cfg.seed);

  for (int d = 0; d < cfg.n_docs; ++d) {
    Document doc;
    doc.doc_id = "doc_" + std::to_string(cfg.seed) + "_" + std::to_string(d);
    int n_sent = std::max(2, rng.poisson(static_cast<double>(cfg.mean_sentences)));
    int label = sample_categorical(rng, zipf);
    for (int s = 0; s < n_sent; ++s) {
      if (s > 0 && rng.uniform01() >= cfg.transition_stickiness)
        label = sample_categorical(rng, zipf);
      int n_tok = std::max(1, rng.poisson(static_cast<double>(cfg.mean_tokens)));
      std::string text;
      for (int t = 0; t < n_tok; ++t) {
        bool use_private =
            cfg.shared_vocab == 0 || rng.uniform01() < 0.7;
        std::string tok =
            use_private
                ? private_token(label, static_cast<int>(rng.uniform_index(
                                           cfg.vocab_per_label)))
                : "s" + shared_tag + "_" +
                      std::to_string(rng.uniform_index(cfg.shared_vocab));
        if (t) text.push_back(' ');
        text += tok;
      }
      Sentence sent;
      sent.text = std::move(text);
      sent.tokens = tokenize(sent.text);
      sent.label_id = label;
      doc.sentences.push_back(std::move(sent));
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace rrl
