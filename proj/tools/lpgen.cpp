// Command-line driver for the paraphrase-generation and toy semantic
// parsing pipeline.

#include <CLI11.hpp>

#include <deque>
#include <memory>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lpgen/classifier.hpp"
#include "lpgen/estimation.hpp"
#include "lpgen/grammar.hpp"
#include "lpgen/lattice.hpp"
#include "lpgen/parser.hpp"
#include "lpgen/pipeline.hpp"
#include "lpgen/sampler.hpp"
#include "lpgen/semparse.hpp"
#include "lpgen/treebank.hpp"

namespace {

using namespace lpgen;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Setting {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

/// Options of one subcommand; every value is kept as text and merged over
/// the config file, flags winning.
class Command {
 public:
  using Handler = int (*)(const PipelineConfig&);

  Command(CLI::App& app, const std::string& name, const std::string& help, Handler fn)
      : sub_(app.add_subcommand(name, help)), fn_(fn) {
    sub_->add_option("--config", config_, "key=value config file; flags override its entries")->check(CLI::ExistingFile);
  }

  Command& opt(const std::string& key, const std::string& help) {
    auto& s = settings_.emplace_back();
    s.key = key;
    std::string flag = "--" + key;
    for (auto& c : flag)
      if (c == '_') c = '-';
    s.opt = sub_->add_option(flag, s.value, help);
    return *this;
  }

  CLI::App* app() const { return sub_; }
  Handler handler() const { return fn_; }
  Command(const Command&) = delete;
  Command& operator=(const Command&) = delete;

  PipelineConfig config() const {
    std::map<std::string, std::string> kv;
    try {
      if (!config_.empty()) kv = parse_config(read_file(config_));
      for (const auto& s : settings_)
        if (s.opt->count() > 0) kv[s.key] = s.value;
      return make_config(kv);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }

 private:
  CLI::App* sub_;
  Handler fn_;
  std::string config_;
  std::deque<Setting> settings_;
};

void need(const PipelineConfig&, std::initializer_list<std::pair<const char*, const std::string*>> req) {
  for (const auto& [name, path] : req)
    if (path->empty()) throw UsageError(std::string("missing required setting --") + name);
  require_inputs(req);
}

/// Writes to --output atomically when given, otherwise to stdout.
void emit(const PipelineConfig& c, const std::string& text) {
  if (c.output.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    write_file_atomic(c.output, text);
  }
}

std::vector<Tokens> read_questions(const std::string& path) {
  std::vector<Tokens> out;
  for (const auto& line : read_lines(path)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(split_ws(t));
  }
  return out;
}

int run_train_grammar(const PipelineConfig& c) {
  need(c, {{"treebank", &c.treebank}});
  auto trees = read_treebank(c.treebank);
  auto g = train_grammar(trees, c.m1, c.seed);
  auto rep = validate(g);
  std::cerr << "trained " << trees.size() << " trees: " << g.binary.size() << " binary, " << g.lexical.size()
            << " lexical rules; " << rep.violations.size() << " violations\n";
  emit(c, serialize(g));
  return 0;
}

int run_train_bilayered(const PipelineConfig& c) {
  need(c, {{"treebank", &c.treebank}, {"alignments", &c.alignments}});
  auto trees = read_treebank(c.treebank);
  auto annotated = train_bilayered(trees, read_alignments(c.alignments), c.m1, c.m2, c.seed);
  std::cerr << "layer config: " << c.m1 << " x " << c.m2 << "; " << annotated.grammar.binary.size() << " binary, "
            << annotated.grammar.lexical.size() << " lexical rules\n";
  emit(c, serialize(annotated.grammar));
  return 0;
}

int run_parse(const PipelineConfig& c) {
  need(c, {{"grammar", &c.grammar}, {"questions", &c.questions}});
  auto g = load_grammar(c.grammar);
  ParseOptions opt;
  opt.unknown_words = true;
  std::string out;
  int failures = 0;
  for (const auto& q : read_questions(c.questions)) {
    try {
      out += render(cky_viterbi(lower_all(q), g, opt), g) + "\n";
    } catch (const Error& e) {
      if (e.code() != Errc::ParseFailure) throw;
      ++failures;
      out += "(FAIL)\n";
      std::cerr << e.what() << "\n";
    }
  }
  emit(c, out);
  if (failures) std::cerr << failures << " questions without a derivation\n";
  return 0;
}

struct Loaded {
  std::optional<LatentGrammar> grammar, bilayered;
  std::optional<ParaphraseRuleDB> rules;
  std::optional<ClassifierModel> classifier;
  std::optional<Gazetteer> gazetteer;

  ParaphraseResources resources() const {
    ParaphraseResources r;
    if (grammar) r.grammar = &*grammar;
    if (bilayered) r.bilayered = &*bilayered;
    if (rules) r.rules = &*rules;
    if (classifier) r.classifier = &*classifier;
    if (gazetteer) r.gazetteer = &*gazetteer;
    return r;
  }
};

Loaded load_lattice_inputs(const PipelineConfig& c) {
  Loaded l;
  if (c.mode == "rules") {
    need(c, {{"rules", &c.rules}});
    l.rules = load_rule_db(c.rules, c.min_rule_score);
  } else if (c.mode == "bilayered") {
    need(c, {{"bilayered", &c.bilayered}});
    l.bilayered = load_grammar(c.bilayered);
  }
  return l;
}

int run_build_lattice(const PipelineConfig& c) {
  need(c, {{"questions", &c.questions}});
  auto l = load_lattice_inputs(c);
  std::string out;
  std::size_t qid = 0;
  for (const auto& q : read_questions(c.questions)) {
    out += "# " + std::to_string(qid++) + "\t" + join(q) + "\n";
    try {
      out += dump(build_lattice(c.mode, lower_all(q), l.resources()));
    } catch (const Error& e) {
      if (e.code() != Errc::ParseFailure) throw;
      out += "# parse failure\n";
      std::cerr << e.what() << "\n";
    }
  }
  emit(c, out);
  return 0;
}

int run_sample(const PipelineConfig& c) {
  need(c, {{"grammar", &c.grammar}, {"questions", &c.questions}});
  auto l = load_lattice_inputs(c);
  l.grammar = load_grammar(c.grammar);
  std::string out;
  for (const auto& q : read_questions(c.questions)) {
    Tokens low = lower_all(q);
    std::vector<ParaphraseCandidate> cands;
    try {
      auto w = build_lattice(c.mode, low, l.resources());
      cands = sample_many(low, *l.grammar, w, c.m_samples, c.seed);
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyIntersection && e.code() != Errc::ParseFailure) throw;
      std::cerr << e.what() << "\n";
    }
    for (const auto& cand : cands) out += std::to_string(cand.seed) + "\t" + detokenize(cand.tokens) + "\n";
  }
  emit(c, out);
  return 0;
}

int run_train_classifier(const PipelineConfig& c) {
  need(c, {{"pairs", &c.pairs}});
  std::optional<Gazetteer> gaz;
  if (!c.gazetteer.empty()) {
    need(c, {{"gazetteer", &c.gazetteer}});
    gaz = load_gazetteer(c.gazetteer);
  }
  auto pairs = read_labeled_pairs(c.pairs);
  auto model = train_classifier(pairs, c.seed, gaz ? &*gaz : nullptr);
  if (c.threshold) model.threshold = *c.threshold;
  std::cerr << "trained on " << pairs.size() << " pairs; threshold " << format_double(model.threshold) << "\n";
  emit(c, serialize(model));
  return 0;
}

int run_paraphrase(const PipelineConfig& c) {
  need(c, {{"grammar", &c.grammar}, {"questions", &c.questions}});
  auto l = load_lattice_inputs(c);
  l.grammar = load_grammar(c.grammar);
  if (!c.classifier.empty()) {
    need(c, {{"classifier", &c.classifier}});
    l.classifier = deserialize_classifier(read_file(c.classifier));
    if (c.threshold) l.classifier->threshold = *c.threshold;
  }
  if (!c.gazetteer.empty()) {
    need(c, {{"gazetteer", &c.gazetteer}});
    l.gazetteer = load_gazetteer(c.gazetteer);
  }
  auto res = l.resources();
  ParaphraseSummary summary;
  std::string out;
  std::size_t qid = 0;
  for (const auto& q : read_questions(c.questions))
    out += format_rows(paraphrase_question(qid++, q, c.mode, res, c.m_samples, c.seed, &summary));
  std::cerr << summary.with_candidates << "/" << summary.questions << " questions with candidates\n";
  emit(c, out);
  return 0;
}

struct SemparseInputs {
  KnowledgeGraph kb;
  EntityDictionary dict;
};

SemparseInputs load_semparse(const PipelineConfig& c) {
  need(c, {{"kb", &c.kb}, {"entities", &c.entities}});
  return {load_kb(c.kb), load_entity_dictionary(c.entities)};
}

int run_semparse_train(const PipelineConfig& c) {
  need(c, {{"qa_train", &c.qa_train}});
  auto in = load_semparse(c);
  auto data = load_qa(c.qa_train);
  if (!c.paraphrases) data = original_only(std::move(data));
  TrainStats stats;
  auto model = perceptron_train(data, in.kb, in.dict, c.epochs, c.beam, c.seed, &stats);
  std::cerr << "examples " << data.size() << ", updates " << stats.updates << ", skipped " << stats.skipped << "\n";
  emit(c, serialize(model));
  return 0;
}

int run_semparse_eval(const PipelineConfig& c) {
  need(c, {{"qa_test", &c.qa_test}, {"model", &c.model}});
  auto in = load_semparse(c);
  auto data = load_qa(c.qa_test);
  if (!c.paraphrases) data = original_only(std::move(data));
  auto model = deserialize_perceptron(read_file(c.model));
  auto rep = evaluate(data, in.kb, in.dict, model.averaged(), c.beam);
  std::ostringstream os;
  os << "questions\t" << rep.questions << "\n";
  os << "avg_precision\t" << format_double(rep.avg_precision) << "\n";
  os << "avg_recall\t" << format_double(rep.avg_recall) << "\n";
  os << "avg_f1\t" << format_double(rep.avg_f1) << "\n";
  os << "oracle_f1\t" << format_double(rep.oracle_f1) << "\n";
  os << "oracle_coverage\t" << format_double(rep.oracle_coverage) << "\n";
  emit(c, os.str());
  return 0;
}

int run_validate_grammar(const PipelineConfig& c) {
  need(c, {{"grammar", &c.grammar}});
  auto g = load_grammar(c.grammar);
  auto rep = validate(g);
  emit(c, format_report(g, rep));
  return rep.violations.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lpgen: latent-variable PCFG paraphrase generation and toy semantic parsing"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  const char* output_help = "Output file (written atomically); stdout when omitted";
  const char* seed_help = "Random seed (default 1)";
  const char* mode_help = "Lattice construction: naive | rules | bilayered (default rules)";

  std::vector<std::unique_ptr<Command>> cmds;
  auto add = [&](const std::string& name, const std::string& help, Command::Handler fn) -> Command& {
    return *cmds.emplace_back(std::make_unique<Command>(app, name, help, fn));
  };

  add("train-grammar", "Estimate a syntactic L-PCFG from a treebank", run_train_grammar)
      .opt("treebank", "Treebank file, one bracketed tree per line")
      .opt("m1", "Latent states per nonterminal (default 24)")
      .opt("seed", seed_help)
      .opt("output", output_help);
  add("train-bilayered", "Estimate a two-layer (syntactic x paraphrase) L-PCFG", run_train_bilayered)
      .opt("treebank", "Treebank file, one bracketed tree per line")
      .opt("alignments", "Paraphrase alignments: qidA<TAB>qidB<TAB>i-j,...")
      .opt("m1", "Syntactic latent states (default 24)")
      .opt("m2", "Paraphrase latent states (default 1000)")
      .opt("seed", seed_help)
      .opt("output", output_help);
  add("parse", "Viterbi-parse questions and print annotated derivations", run_parse)
      .opt("grammar", "Grammar file")
      .opt("questions", "One tokenized question per line")
      .opt("output", output_help);
  add("build-lattice", "Build word lattices for questions", run_build_lattice)
      .opt("questions", "One tokenized question per line")
      .opt("mode", mode_help)
      .opt("lattice", "Alias of --mode")
      .opt("rules", "Paraphrase rule database: source<TAB>target<TAB>score")
      .opt("min_rule_score", "Drop rules scoring below this value")
      .opt("bilayered", "Bi-layered grammar file")
      .opt("output", output_help);
  add("sample", "Sample paraphrase candidates constrained by a lattice", run_sample)
      .opt("grammar", "Sampling grammar file")
      .opt("questions", "One tokenized question per line")
      .opt("m", "Number of samples per question (default 20)")
      .opt("seed", "First sample seed; sample i uses seed+i (default 1)")
      .opt("lattice", mode_help)
      .opt("mode", "Alias of --lattice")
      .opt("rules", "Paraphrase rule database")
      .opt("min_rule_score", "Drop rules scoring below this value")
      .opt("bilayered", "Bi-layered grammar file")
      .opt("output", output_help);
  add("train-classifier", "Train the paraphrase classifier on labeled pairs", run_train_classifier)
      .opt("pairs", "Labeled pairs: source<TAB>candidate<TAB>0|1")
      .opt("gazetteer", "Entity surface forms for the entity-preservation feature")
      .opt("threshold", "Override the tuned decision threshold")
      .opt("seed", seed_help)
      .opt("output", output_help);
  add("paraphrase", "Lattice, sample and classify: scored paraphrases per question", run_paraphrase)
      .opt("grammar", "Sampling grammar file")
      .opt("questions", "One tokenized question per line")
      .opt("mode", mode_help)
      .opt("lattice", "Alias of --mode")
      .opt("rules", "Paraphrase rule database")
      .opt("min_rule_score", "Drop rules scoring below this value")
      .opt("bilayered", "Bi-layered grammar file")
      .opt("classifier", "Classifier model; candidates below its threshold are dropped")
      .opt("threshold", "Override the classifier threshold")
      .opt("gazetteer", "Entity surface forms")
      .opt("m", "Samples per question (default 20)")
      .opt("seed", "First sample seed (default 1)")
      .opt("output", output_help);
  add("semparse-train", "Train the grounding model with the averaged perceptron", run_semparse_train)
      .opt("kb", "Knowledge base TSV")
      .opt("entities", "Entity dictionary: surface<TAB>KB id")
      .opt("qa_train", "Training questions")
      .opt("epochs", "Perceptron epochs (default 20)")
      .opt("beam", "Grounding beam size (default 100)")
      .opt("paraphrases", "true: use all paraphrase graphs; false: original graph only")
      .opt("seed", seed_help)
      .opt("output", output_help);
  add("semparse-eval", "Evaluate a grounding model: average precision, recall, F1", run_semparse_eval)
      .opt("kb", "Knowledge base TSV")
      .opt("entities", "Entity dictionary: surface<TAB>KB id")
      .opt("qa_test", "Evaluation questions")
      .opt("model", "Model written by semparse-train")
      .opt("beam", "Grounding beam size (default 100)")
      .opt("paraphrases", "true: use all paraphrase graphs; false: original graph only")
      .opt("output", output_help);
  add("validate-grammar", "Check normalization and consistency of a grammar file", run_validate_grammar)
      .opt("grammar", "Grammar file")
      .opt("output", output_help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  for (const auto& cmd : cmds) {
    if (!cmd->app()->parsed()) continue;
    try {
      return cmd->handler()(cmd->config());
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 1;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}
