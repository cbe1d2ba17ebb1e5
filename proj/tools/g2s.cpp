// g2s: build topic graphs, train, generate, report statistics, and check gradients.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "g2s/g2s.hpp"

namespace fs = std::filesystem;
using namespace g2s;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kVerify = 3 };

struct PipelineFlags {
  std::string lexicon, stopwords;
  std::size_t topk = TextRankConfig{}.top_k;
  std::string tokenizer = "whitespace";
  std::string edge_strategy = "structural";
  bool isolate_title = false;
  std::size_t max_vertex_tokens = GraphOptions{}.max_vertex_tokens;

  void add(CLI::App* app) {
    app->add_option("--lexicon", lexicon, "Named-entity lexicon, one token per line");
    app->add_option("--stopwords", stopwords, "Stop-word list, one token per line");
    app->add_option("--topk", topk, "TextRank keywords kept per article")->capture_default_str();
    app->add_option("--tokenizer", tokenizer, "Tokenizer mode")
        ->check(CLI::IsMember({"whitespace", "character"}))
        ->capture_default_str();
    app->add_option("--edge-strategy", edge_strategy, "Edge weights: shared-sentence counts or tf-idf cosine")
        ->check(CLI::IsMember({"structural", "tfidf"}))
        ->capture_default_str();
    app->add_flag("--isolate-title", isolate_title, "Keep the title out of keyword matching");
    app->add_option("--max-vertex-tokens", max_vertex_tokens, "Token cap per vertex, keyword included")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  PipelineConfig config() const {
    PipelineConfig pc;
    pc.tokenizer.mode = tokenizer_mode_from_string(tokenizer);
    pc.textrank.top_k = topk;
    pc.graph.isolate_title = isolate_title;
    pc.graph.max_vertex_tokens = max_vertex_tokens;
    pc.graph.strategy = edge_strategy == "tfidf" ? EdgeStrategy::kTfidf : EdgeStrategy::kStructural;
    return pc;
  }

  TokenSet lexicon_set() const { return lexicon.empty() ? TokenSet{} : load_token_set(lexicon); }
  TokenSet stopword_set() const { return stopwords.empty() ? TokenSet{} : load_token_set(stopwords); }
};

std::string safe_filename(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out.empty() ? "_" : out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

// ---------------------------------------------------------------------------

struct BuildGraphCmd {
  std::string input, out, format = "dot";
  PipelineFlags pipe;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("build-graph", "Build one topic graph per article");
    app->add_option("--input,--corpus", input, "Corpus file (JSON lines)")->required();
    app->add_option("--format", format, "Output format")->check(CLI::IsMember({"dot", "structured"}))->capture_default_str();
    app->add_option("--out", out, "Output directory (one file per article); stdout when omitted");
    pipe.add(app);
    app->callback([this] { run(); });
  }

  void run() const {
    const auto pc = pipe.config();
    const auto articles = load_corpus(input, pc.tokenizer);
    const Preprocessor pre(Vocab{}, pc, pipe.lexicon_set(), pipe.stopword_set(), CorpusStats::from_articles(articles));
    const auto fmt = graph_format_from_string(format);
    if (!out.empty()) fs::create_directories(out);
    for (const auto& a : articles) {
      const auto text = export_graph(pre.graph(a, pre.keywords(a)), fmt);
      if (out.empty()) {
        std::cout << text << (text.ends_with('\n') ? "" : "\n");
      } else {
        write_text(fs::path(out) / (safe_filename(a.id) + (fmt == GraphFormat::kDot ? ".dot" : ".json")), text);
      }
    }
  }
};

// ---------------------------------------------------------------------------

struct TrainCmd {
  std::string corpus, out, precision = "f64", resume;
  PipelineFlags pipe;
  TrainConfig train;
  ModelConfig model;
  std::size_t dim = 128, heads = 4;
  bool no_clip = false, unscaled = false;
  std::string attention = "bilinear", pooling = "title", activation = "relu";
  CLI::Option* epochs_opt = nullptr;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train", "Train a model and write checkpoints");
    app->add_option("--corpus,--input", corpus, "Training corpus (JSON lines)")->required();
    app->add_option("--out", out, "Output directory for train.log and checkpoints")->required();
    epochs_opt = app->add_option("--epochs", train.epochs, "Total training epochs")->capture_default_str();
    app->add_option("--batch", train.batch_size, "Examples per optimizer step")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--lr", train.lr, "Initial Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--lr-decay", train.lr_decay, "Learning-rate multiplier per epoch")->capture_default_str();
    app->add_option("--seed", train.seed, "Seed for initialization, shuffling and dropout")->capture_default_str();
    app->add_option("--grad-clip", *train.grad_clip, "Global gradient-norm bound")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_flag("--no-clip", no_clip, "Disable gradient clipping");
    app->add_option("--vocab-size", model.vocab_size, "Maximum vocabulary size, specials included")->capture_default_str();
    app->add_option("--dropout", model.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.99))->capture_default_str();
    app->add_option("--dim", dim, "Embedding and hidden size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--heads", heads, "Self-attention heads")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--sa-layers", model.encoder.layers, "Self-attention layers")->capture_default_str();
    app->add_option("--gcn-layers", model.gcn.layers, "GCN layers")->capture_default_str();
    app->add_option("--rnn-layers", model.decoder.rnn_layers, "Decoder LSTM layers")->capture_default_str();
    app->add_option("--activation", activation, "GCN activation")->check(CLI::IsMember({"relu", "tanh"}))->capture_default_str();
    app->add_option("--pooling", pooling, "Decoder initial state readout")
        ->check(CLI::IsMember({"title", "max", "mean"}))
        ->capture_default_str();
    app->add_option("--attention", attention, "Decoder attention scoring")
        ->check(CLI::IsMember({"bilinear", "additive"}))
        ->capture_default_str();
    app->add_flag("--unscaled-attention", unscaled, "Do not divide self-attention scores by sqrt(head dim)");
    app->add_option("--precision", precision, "Parameter precision")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
    app->add_option("--resume", resume,
                    "Continue from a checkpoint; its training settings apply, --epochs sets the new total");
    pipe.add(app);
    app->callback([this] { run(); });
  }

  ModelConfig model_config(std::size_t vocab) const {
    ModelConfig m = model;
    m.encoder.embed_dim = dim;
    m.encoder.heads = heads;
    m.encoder.scaled_scores = !unscaled;
    m.encoder.max_positions = pipe.max_vertex_tokens + 1;
    m.gcn.hidden_dim = dim;
    m.gcn.activation = activation == "tanh" ? Activation::kTanh : Activation::kRelu;
    m.gcn.pooling = pooling == "max" ? Pooling::kMax : pooling == "mean" ? Pooling::kMean : Pooling::kTitle;
    m.decoder.hidden_dim = dim;
    m.decoder.attention = attention == "additive" ? AttentionKind::kAdditive : AttentionKind::kBilinear;
    m.vocab_size = vocab;
    m.validate();
    return m;
  }

  void run() {
    if (no_clip) train.grad_clip.reset();
    train.validate();
    if (!resume.empty()) {
      const auto ck = read_checkpoint_file(resume);
      const auto info = read_checkpoint_info(ck);
      info.dtype == DType::kF32 ? resume_run<float>(ck, info) : resume_run<double>(ck, info);
      return;
    }
    const auto pc = pipe.config();
    const auto articles = load_corpus(corpus, pc.tokenizer);
    const Preprocessor pre(build_vocab(articles, model.vocab_size), pc, pipe.lexicon_set(), pipe.stopword_set(),
                           CorpusStats::from_articles(articles));
    precision == "f32" ? fresh_run<float>(articles, pre) : fresh_run<double>(articles, pre);
  }

  template <class T>
  void fresh_run(const std::vector<Article>& articles, const Preprocessor& pre) {
    const auto data = make_training_set(pre, articles);
    if (data.examples.empty()) throw DataError("empty corpus: no article-comment pairs to train on");
    Graph2Seq<T> m(model_config(pre.vocab().size()), pre.vocab().size());
    m.init_params(train.seed);
    TrainState<T> st;
    loop(m, pre, data, st, std::ios::trunc);
  }

  template <class T>
  void resume_run(const CheckpointFile& ck, const CheckpointInfo& info) {
    const std::size_t epochs = train.epochs;
    train = info.train;
    if (epochs_opt->count()) train.epochs = epochs;
    const auto pre = info.preprocessor();
    const auto articles = load_corpus(corpus, info.pipeline.tokenizer);
    const auto data = make_training_set(pre, articles);
    Graph2Seq<T> m(info.model, pre.vocab().size());
    TrainState<T> st;
    restore_checkpoint(ck, m, &st);
    loop(m, pre, data, st, std::ios::app);
  }

  template <class T>
  void loop(Graph2Seq<T>& m, const Preprocessor& pre, const TrainingSet& data, TrainState<T>& st,
            std::ios::openmode mode) {
    fs::create_directories(out);
    std::ofstream log(fs::path(out) / "train.log", std::ios::binary | mode);
    if (!log) throw DataError("cannot write training log in '" + out + "'");
    Trainer<T> trainer(m, train);
    trainer.train(
        data, st, [&](const nlohmann::json& j) { log << j.dump() << "\n" << std::flush; },
        [&](const TrainState<T>& s) {
          write_checkpoint_file((fs::path(out) / ("epoch-" + std::to_string(s.epoch) + ".ckpt")).string(),
                                make_checkpoint(m, pre, train, s));
        });
    write_checkpoint_file((fs::path(out) / "model.ckpt").string(), make_checkpoint(m, pre, train, st));
  }
};

// ---------------------------------------------------------------------------

struct GenerateCmd {
  std::string checkpoint, corpus, out;
  std::size_t beam = 1;
  std::optional<std::size_t> max_len;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("generate", "Generate one comment per article");
    app->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    app->add_option("--corpus,--input", corpus, "Articles (JSON lines)")->required();
    app->add_option("--out", out, "Output file (JSON lines); stdout when omitted");
    app->add_option("--beam", beam, "Beam size; 1 is greedy")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--max-len", max_len, "Maximum generated tokens (default from the checkpoint)")
        ->check(CLI::PositiveNumber);
    app->callback([this] { run(); });
  }

  void run() const {
    const auto ck = read_checkpoint_file(checkpoint);
    const auto info = read_checkpoint_info(ck);
    info.dtype == DType::kF32 ? go<float>(ck, info) : go<double>(ck, info);
  }

  template <class T>
  void go(const CheckpointFile& ck, const CheckpointInfo& info) const {
    const auto pre = info.preprocessor();
    Graph2Seq<T> m(info.model, pre.vocab().size());
    restore_checkpoint(ck, m);
    const auto articles = load_corpus(corpus, info.pipeline.tokenizer);
    const std::size_t len = max_len.value_or(info.model.decoder.max_len);
    std::ofstream file;
    if (!out.empty()) {
      file.open(out, std::ios::binary | std::ios::trunc);
      if (!file) throw DataError("cannot write '" + out + "'");
    }
    std::ostream& os = out.empty() ? std::cout : file;
    for (const auto& a : articles) {
      const auto p = pre.prepare(a);
      const auto h = m.decode(p.encoded, beam, len);
      os << generation_line({a.id, join_tokens(pre.decode(h.ids, p.encoded)), h.score()}) << "\n";
    }
  }
};

// ---------------------------------------------------------------------------

struct StatsCmd {
  std::string input, stopwords;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("stats", "Summarize generated comments");
    app->add_option("--input", input, "Output of generate")->required();
    app->add_option("--stopwords", stopwords, "Stop-word list excluded from the unique-word count");
    app->callback([this] { run(); });
  }

  void run() const {
    std::vector<std::string> comments;
    for (const auto& g : load_generated(input)) comments.push_back(g.comment);
    const auto sw = stopwords.empty() ? TokenSet{} : load_token_set(stopwords);
    std::cout << comment_stats(comments, sw).to_json().dump() << "\n";
  }
};

// ---------------------------------------------------------------------------

struct GradCheckCmd {
  std::uint64_t seed = 1;
  std::size_t dim = 128, heads = 4, samples = 64;
  double corrupt = 1.0;
  double threshold = 1e-4;
  int* exit_code;

  explicit GradCheckCmd(int* ec) : exit_code(ec) {}

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("grad-check", "Finite-difference check of the full model on a random tiny article");
    app->add_option("--seed", seed, "Seed for the article and the parameters")->capture_default_str();
    app->add_option("--dim", dim, "Embedding and hidden size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--heads", heads, "Self-attention heads")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--samples", samples, "Coordinates sampled per tensor")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--corrupt-backward", corrupt, "Test hook: scale the tanh derivative by this factor")
        ->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() const {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    const Tokens words = {"red", "blue", "green", "stone", "river", "light", "north", "quiet"};
    const Tokens keys = {"Alpha", "Beta"};
    RawRecord rec;
    rec.id = "gradcheck";
    rec.title = keys[0] + " " + words[pick(words.size())];
    for (int s = 0; s < 3; ++s) {
      rec.content += keys[static_cast<std::size_t>(s) % 2];
      for (std::size_t i = 1 + pick(4); i > 0; --i) rec.content += " " + words[pick(words.size())];
      rec.content += " . ";
    }
    rec.comments = {keys[pick(2)] + " " + words[pick(words.size())] + " " + words[pick(words.size())]};
    const Article a = to_article(rec);

    PipelineConfig pc;
    pc.textrank.top_k = 0;  // exactly the two lexicon keywords
    const Preprocessor pre(build_vocab({a}, 60000), pc, TokenSet(keys.begin(), keys.end()));
    const auto p = pre.prepare(a);
    const auto targets = pre.target_ids(a.comments[0], p.encoded);

    auto cfg = ModelConfig::with_dim(dim, heads);
    cfg.vocab_size = pre.vocab().size();
    Graph2Seq<double> m(cfg, pre.vocab().size());
    m.init_params(seed);
    ad::GradCheckOptions opts;
    opts.samples_per_tensor = samples;
    opts.seed = seed;
    opts.tape.tanh_grad_fault = corrupt;
    const auto rep = ad::grad_check<double>([&](Tape<double>& t) { return m.loss(t, p.encoded, targets); },
                                            m.params(), opts);
    const bool ok = rep.max_rel_error < threshold;
    std::printf("max_rel_error %.6e (%s[%zu] analytic %.9e numeric %.9e, %zu coordinates) %s\n", rep.max_rel_error,
                rep.worst_param.c_str(), rep.worst_index, rep.worst_analytic, rep.worst_numeric, rep.coordinates,
                ok ? "PASS" : "FAIL");
    if (!ok) *exit_code = kVerify;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-to-sequence comment generation over topic interaction graphs"};
  app.set_config("--config", "", "key=value file; flags on the command line take precedence");
  app.require_subcommand(1);
  int exit_code = kOk;
  BuildGraphCmd build;
  TrainCmd train;
  GenerateCmd generate;
  StatsCmd stats;
  GradCheckCmd grad(&exit_code);
  build.add(app);
  train.add(app);
  generate.add(app);
  stats.add(app);
  grad.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return exit_code;
}
