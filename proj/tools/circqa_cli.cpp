// circqa: generate datasets, train, evaluate, interpret, report, inspect.
//
// Exit status: 0 success, 1 data/runtime error, 2 usage error.

#include <cstdio>
#include <iostream>
#include <regex>
#include <sstream>

#include "CLI11.hpp"
#include "circqa/error.hpp"
#include "circqa/fragments.hpp"
#include "circqa/io.hpp"
#include "circqa/kernels.hpp"
#include "circqa/metrics.hpp"
#include "circqa/trainer.hpp"

using namespace circqa;

namespace {

struct Common {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string out_dir;
};

nlohmann::json parse_value(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return text;
  }
}

// key=value overrides, values parsed as JSON when possible.
void apply_overrides(nlohmann::json& target, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected key=value, got '" + s + "'");
    target[s.substr(0, eq)] = parse_value(s.substr(eq + 1));
  }
}

std::string fmt(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void snapshot(const CLI::App& app, const fs::path& dir) { write_text(dir / "config.ini", app.config_to_str(true, false)); }

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string task;
  std::string base;
  std::vector<double> fractions = {0.1, 0.2, 0.3, 0.5};
  std::vector<std::string> sets;
};

int run_generate(const CLI::App& app, const Common& c, const GenerateArgs& a) {
  ensure_fresh_dir(c.out_dir);
  const fs::path out = c.out_dir;
  nlohmann::json overrides = nlohmann::json::object();
  apply_overrides(overrides, a.sets);

  if (a.task == "overgeneralisation") {
    if (a.base.empty()) throw CLI::ValidationError("--base", "overgeneralisation needs --base <dataset dir>");
    const auto base = read_dataset(a.base);
    const std::string base_hash = dataset_hash(base);
    const auto bundles = gen_overgeneralisation(base, a.fractions, c.seed);
    nlohmann::json index = nlohmann::json::array();
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      const std::string name = "corrupt_" + fmt(a.fractions[i], "%.2f");
      fs::create_directories(out / name);
      const auto m = write_dataset(out / name, bundles[i], {{"inputs", {{"base", a.base}, {"base_hash", base_hash}}}});
      index.push_back({{"fraction", a.fractions[i]}, {"dir", name}, {"content_hash", m["content_hash"]}});
      std::cout << name << " " << m["content_hash"].get<std::string>() << "\n";
    }
    write_text(out / "index.json", index.dump(2) + "\n");
    snapshot(app, out);
    return 0;
  }

  DatasetBundle b;
  if (a.task == "productivity") {
    auto cfg = ProductivityConfig().to_json();
    cfg.update(overrides);
    b = gen_productivity(ProductivityConfig::from_json(cfg), c.seed);
  } else if (a.task == "systematicity") {
    auto cfg = SystematicityConfig().to_json();
    cfg.update(overrides);
    b = gen_systematicity(SystematicityConfig::from_json(cfg), c.seed);
  } else if (a.task == "substitutivity") {
    auto cfg = SubstitutivityConfig().to_json();
    cfg.update(overrides);
    b = gen_substitutivity(SubstitutivityConfig::from_json(cfg), c.seed);
  } else {
    throw CLI::ValidationError("--task", "unknown task '" + a.task + "'");
  }
  const auto m = write_dataset(out, b, {{"inputs", nlohmann::json::object()}});
  snapshot(app, out);
  std::cout << "task " << b.task << ": train " << b.train.size() << ", valid_v " << b.valid_v.size() << ", test "
            << b.test.size() << ", valid_c " << b.valid_c.size() << ", twin " << b.twin.size() << "\n";
  std::cout << "content hash " << m["content_hash"].get<std::string>() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string backend = "quantum";
  double lr = -1.0;
  int batch_size = 0;
  int epochs = 0;
  std::string scheme = "V";
  bool curriculum = false;
  std::string curriculum_mode = "smooth";
  int curriculum_epochs = 30;
  std::vector<std::string> sets;
};

int run_train(const CLI::App& app, const Common& c, const TrainArgs& a) {
  RunConfig run;
  if (a.backend == "quantum") {
    run = RunConfig::quantum_defaults();
  } else if (a.backend == "neural") {
    run = RunConfig::neural_defaults();
  } else {
    throw CLI::ValidationError("--backend", "expected quantum or neural");
  }
  apply_overrides(run.model, a.sets);
  if (a.lr >= 0.0) run.learning_rate = a.lr;
  if (a.batch_size > 0) run.batch_size = a.batch_size;
  if (a.epochs > 0) run.max_epochs = a.epochs;
  run.scheme = scheme_from_name(a.scheme);
  run.curriculum = {a.curriculum, a.curriculum_epochs,
                    a.curriculum_mode == "step" ? CurriculumMode::Step : CurriculumMode::Smooth};
  run.seed = c.seed;
  run.deterministic = c.deterministic;
  run = RunConfig::from_json(run.to_json());

  const auto data = read_dataset(a.data);
  ensure_fresh_dir(c.out_dir);
  const fs::path out = c.out_dir;
  fs::create_directories(out / "checkpoints");
  snapshot(app, out);
  write_text(out / "run_config.json",
             nlohmann::json({{"run", run.to_json()},
                             {"data", fs::absolute(a.data).string()},
                             {"data_hash", dataset_hash(data)},
                             {"kernels", kernels().name}})
                     .dump(2) +
                 "\n");

  std::ofstream log(out / "train.log");
  std::string csv = epoch_csv_header() + "\n";
  auto result = train(run, data, [&](EpochLog& l, const ParameterStore& store) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03d", l.epoch);
    save_checkpoint(out / "checkpoints" / name, run.model, store, run.seed, l.epoch, l.to_json());
    l.checkpoint = std::string("checkpoints/") + name + ".json";
    csv += epoch_csv_row(l) + "\n";
    write_text(out / "metrics.csv", csv);
    std::ostringstream line;
    line << "epoch " << l.epoch << " loss " << fmt(l.loss);
    for (const auto& [s, acc] : l.validation) line << " valid_" << scheme_name(s) << " " << fmt(acc, "%.4f");
    if (l.train_accuracy) line << " train " << fmt(*l.train_accuracy, "%.4f");
    log << line.str() << "\n" << std::flush;
    std::cout << line.str() << "\n" << std::flush;
  });

  const auto chosen = select_model(result.logs, run.scheme);
  const nlohmann::json report = {{"scheme", std::string(scheme_name(run.scheme))},
                                 {"selected_epoch", result.logs[chosen].epoch},
                                 {"checkpoint", result.logs[chosen].checkpoint},
                                 {"parameters", result.store.size()}};
  write_text(out / "report.json", report.dump(2) + "\n");
  std::cout << "selected epoch " << result.logs[chosen].epoch << " for scheme " << scheme_name(run.scheme) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string run;
  std::string checkpoint;
  std::string data;
  std::string scheme;
  std::vector<double> epsilons = {0.05, 0.1, 0.2};
};

int run_evaluate(const CLI::App& app, const Common& c, const EvaluateArgs& a) {
  if (a.run.empty() == a.checkpoint.empty())
    throw CLI::ValidationError("--run/--checkpoint", "give exactly one of --run or --checkpoint");
  fs::path checkpoint_path = a.checkpoint;
  nlohmann::json selection = nlohmann::json::object();
  std::string data_dir = a.data;
  if (!a.run.empty()) {
    const fs::path run_dir = a.run;
    const auto run_cfg = nlohmann::json::parse(read_text(run_dir / "run_config.json"));
    const Scheme scheme =
        scheme_from_name(a.scheme.empty() ? run_cfg["run"].value("scheme", std::string("V")) : a.scheme);
    const auto logs = parse_epoch_csv(read_text(run_dir / "metrics.csv"));
    const auto chosen = select_model(logs, scheme);
    checkpoint_path = run_dir / logs[chosen].checkpoint;
    selection = {{"scheme", std::string(scheme_name(scheme))},
                 {"selected_epoch", logs[chosen].epoch},
                 {"checkpoint", logs[chosen].checkpoint}};
    if (auto s = scheme_score(logs[chosen], scheme)) selection["validation_score"] = *s;
    if (data_dir.empty()) data_dir = run_cfg.value("data", std::string());
  }
  if (data_dir.empty()) throw CLI::ValidationError("--data", "no dataset given and none recorded in the run");

  const auto ckpt = load_checkpoint(checkpoint_path);
  const auto model = make_model(ckpt.model);
  const auto data = read_dataset(data_dir);
  ensure_fresh_dir(c.out_dir);
  const fs::path out = c.out_dir;

  std::vector<LabeledExample> all;
  for (const auto* e : data.all()) all.push_back(*e);
  const auto preds = predict_all(*model, ckpt.store, compile_examples(all));
  write_predictions(out / "predictions.csv", preds);

  const auto report = composition_report(data, preds, a.epsilons);
  auto j = report.to_json();
  j["selection"] = selection;
  j["inputs"] = {{"checkpoint", fs::absolute(checkpoint_path).string()},
                 {"checkpoint_hash", file_hash(checkpoint_path)},
                 {"data", fs::absolute(data_dir).string()},
                 {"data_hash", dataset_hash(data)},
                 {"predictions_hash", file_hash(out / "predictions.csv")}};
  write_text(out / "report.json", j.dump(2) + "\n");
  write_text(out / "report.txt", report.to_text());
  write_text(out / "strata.csv", report.strata_csv());

  std::string conf = "split,confounding,answer,n,correct,accuracy\n";
  for (const auto& [name, xs] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
    for (const auto& b : confounding_split(*xs, preds)) {
      conf += std::string(name) + "," + std::to_string(b.count) + "," + std::string(answer_name(b.answer)) + "," +
              std::to_string(b.tally.total) + "," + std::to_string(b.tally.correct) + "," + fmt(b.tally.accuracy()) +
              "\n";
    }
  }
  write_text(out / "confounding.csv", conf);
  snapshot(app, out);
  std::cout << report.to_text();
  return 0;
}

// ---------------------------------------------------------------------------

struct InterpretArgs {
  std::string checkpoint;
  std::string fragments;
  std::string fragments_file;
  std::string extra = "ACpko";
  std::string question = "Is Andrew in the park?";
  std::string object = "milk";
  std::vector<std::string> boxes;
};

std::string matrix_csv(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& m) {
  std::string out = "";
  for (const auto& l : labels) out += "," + l;
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += labels[i];
    for (double v : m[i]) out += "," + fmt(v);
    out += "\n";
  }
  return out;
}

int run_interpret(const CLI::App& app, const Common& c, const InterpretArgs& a) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto model = make_model(ckpt.model);
  std::vector<std::string> specs;
  auto split_specs = [&](const std::string& text) {
    std::string cur;
    for (char ch : text) {
      if (ch == ',' || ch == '\n' || ch == ' ') {
        if (!cur.empty()) specs.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) specs.push_back(cur);
  };
  split_specs(a.fragments);
  if (!a.fragments_file.empty()) split_specs(read_text(a.fragments_file));
  if (specs.empty() && a.boxes.empty())
    throw CLI::ValidationError("--fragments/--boxes", "nothing to interpret");

  ensure_fresh_dir(c.out_dir);
  const fs::path out = c.out_dir;
  if (!specs.empty()) {
    const auto cast = FragmentCast::default_cast(a.object);
    std::vector<Fragment> frags;
    for (const auto& s : specs) frags.push_back(build_fragment(s, a.extra, cast));
    const Question q = parse_question(a.question);
    for (Answer ans : {Answer::Yes, Answer::No}) {
      const auto m = assertion_relative_matrix(frags, q, ans, *model, ckpt.store);
      const std::string file = std::string("fragments_") + std::string(answer_name(ans)) + ".csv";
      write_text(out / file, matrix_csv(specs, m));
      std::cout << "assertion " << answer_name(ans) << ":\n" << matrix_csv(specs, m);
    }
  }
  if (!a.boxes.empty()) {
    std::vector<BoxKey> keys;
    std::vector<std::string> labels;
    for (const auto& w : a.boxes) {
      keys.push_back(resolve_box_key(ckpt.store, w));
      labels.push_back(keys.back().str());
    }
    const auto m = box_overlap_matrix(keys, *model, ckpt.store);
    write_text(out / "boxes.csv", matrix_csv(labels, m));
    std::cout << "box overlaps:\n" << matrix_csv(labels, m);
  }
  write_text(out / "inputs.json",
             nlohmann::json({{"checkpoint", fs::absolute(a.checkpoint).string()},
                             {"checkpoint_hash", file_hash(a.checkpoint)}})
                     .dump(2) +
                 "\n");
  snapshot(app, out);
  return 0;
}

// ---------------------------------------------------------------------------

int run_report(const CLI::App& app, const Common& c, const std::vector<std::string>& dirs) {
  std::string csv = "run,task,acc_train,acc_test,c_fact,c_score,score_ab,score_all,selected_epoch\n";
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& d : dirs) {
    const fs::path p = fs::path(d) / "report.json";
    const auto j = nlohmann::json::parse(read_text(p));
    auto opt = [&](const char* key) { return j.contains(key) ? fmt(j[key].get<double>()) : std::string(); };
    std::string epoch;
    if (j.contains("selection") && j["selection"].contains("selected_epoch"))
      epoch = std::to_string(j["selection"]["selected_epoch"].get<int>());
    csv += d + "," + j.value("task", std::string()) + "," + opt("acc_train") + "," + opt("acc_test") + "," +
           opt("c_fact") + "," + opt("c_score") + "," + opt("score_ab") + "," + opt("score_all") + "," + epoch + "\n";
    inputs.push_back({{"report", fs::absolute(p).string()}, {"hash", file_hash(p)}});
  }
  ensure_fresh_dir(c.out_dir);
  write_text(fs::path(c.out_dir) / "summary.csv", csv);
  write_text(fs::path(c.out_dir) / "inputs.json", inputs.dump(2) + "\n");
  snapshot(app, c.out_dir);
  std::cout << csv;
  return 0;
}

// ---------------------------------------------------------------------------

int run_inspect(const std::string& story_text, const std::string& file, bool expand, bool assertions) {
  std::string text = story_text;
  if (!file.empty()) text = read_text(file);
  if (text.empty()) throw CLI::ValidationError("--story/--file", "no story given");
  // one sentence per line, or several on one line separated by ". "
  std::string lines;
  for (std::size_t i = 0; i < text.size(); ++i) {
    lines += text[i];
    const bool boundary = (text[i] == '.' || text[i] == '?') && i + 1 < text.size() && text[i + 1] == ' ';
    const bool prefix = i > 0 && (std::isdigit(static_cast<unsigned char>(text[i - 1])) || text[i - 1] == 'Q');
    if (boundary && !prefix) {
      lines += '\n';
      ++i;
    }
  }
  static const std::regex numbered(R"(^\s*(\d+|Q)\.\s+)");
  std::istringstream in(lines);
  std::string line;
  std::vector<SentenceAst> sentences;
  std::optional<Question> question;
  while (std::getline(in, line)) {
    line = std::regex_replace(line, numbered, "");
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line.back() == '?') {
      question = parse_question(line);
    } else {
      sentences.push_back(parse_sentence(line));
    }
  }
  const Story story = Story::from_sentences(std::move(sentences));
  Diagram d = build_story_diagram(story);
  if (expand) d = sandwich_expand(d);
  std::cout << serialize(d);
  if (assertions && question) {
    const auto pair = build_assertion_pair(*question);
    std::cout << "# assertion yes\n" << serialize(pair.yes) << "# assertion no\n" << serialize(pair.no);
    std::cout << "# oracle answer: " << answer_name(oracle_answer(story, *question)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional question answering over text circuits"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file (flags override it)");
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_flag("--deterministic", common.deterministic, "Fixed reduction order (recorded in outputs)");
    auto* o = sub->add_option("--out-dir", common.out_dir, "Fresh output directory");
    if (needs_out) o->required();
  };

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a dataset bundle");
  add_common(generate, true);
  generate->add_option("--task", gen.task, "productivity | systematicity | substitutivity | overgeneralisation")
      ->required()
      ->check(CLI::IsMember({"productivity", "systematicity", "substitutivity", "overgeneralisation"}));
  generate->add_option("--base", gen.base, "Base dataset directory (overgeneralisation)");
  generate->add_option("--fractions", gen.fractions, "Corruption fractions")->delimiter(',')->capture_default_str();
  generate->add_option("--set", gen.sets, "Generator config override key=value");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  add_common(train_cmd, true);
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--backend", tr.backend, "quantum | neural")
      ->capture_default_str()
      ->check(CLI::IsMember({"quantum", "neural"}));
  train_cmd->add_option("--lr", tr.lr, "Learning rate (backend default when omitted)");
  train_cmd->add_option("--batch-size", tr.batch_size, "Batch size (backend default when omitted)");
  train_cmd->add_option("--epochs", tr.epochs, "Epochs (backend default when omitted)");
  train_cmd->add_option("--scheme", tr.scheme, "Validation scheme V|A|B|C|AB|All")
      ->capture_default_str()
      ->check(CLI::IsMember({"V", "A", "B", "C", "AB", "All"}));
  train_cmd->add_flag("--curriculum", tr.curriculum, "Enable the curriculum");
  train_cmd->add_option("--curriculum-mode", tr.curriculum_mode, "smooth | step")
      ->capture_default_str()
      ->check(CLI::IsMember({"smooth", "step"}));
  train_cmd->add_option("--curriculum-epochs", tr.curriculum_epochs, "Curriculum length")->capture_default_str();
  train_cmd->add_option("--set", tr.sets, "Model config override key=value (e.g. dim=24, schema=Hidden)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Predict and report compositionality metrics");
  add_common(evaluate, true);
  evaluate->add_option("--run", ev.run, "Run directory (selects the epoch by scheme)");
  evaluate->add_option("--checkpoint", ev.checkpoint, "Checkpoint manifest to evaluate directly");
  evaluate->add_option("--data", ev.data, "Dataset directory (defaults to the run's)");
  evaluate->add_option("--scheme", ev.scheme, "Selection scheme (defaults to the run's)")
      ->check(CLI::IsMember({"V", "A", "B", "C", "AB", "All"}));
  evaluate->add_option("--epsilons", ev.epsilons, "Epsilon thresholds")->delimiter(',')->capture_default_str();

  InterpretArgs in;
  auto* interpret = app.add_subcommand("interpret", "Fragment and box overlap tables");
  add_common(interpret, true);
  interpret->add_option("--checkpoint", in.checkpoint, "Checkpoint manifest")->required()->check(CLI::ExistingFile);
  interpret->add_option("--fragments", in.fragments, "Comma-separated fragment codes, e.g. ID,Ap,Ck-Ap");
  interpret->add_option("--fragments-file", in.fragments_file, "File with one fragment code per line");
  interpret->add_option("--cast", in.extra, "Cast letters present in every fragment")->capture_default_str();
  interpret->add_option("--question", in.question, "Question the assertions come from")->capture_default_str();
  interpret->add_option("--object", in.object, "Noun for the letter o")->capture_default_str();
  interpret->add_option("--boxes", in.boxes, "Words (or word:SHAPE) for the box overlap matrix")->delimiter(',');

  std::vector<std::string> report_dirs;
  auto* report = app.add_subcommand("report", "Aggregate evaluate outputs into one table");
  add_common(report, true);
  report->add_option("runs", report_dirs, "Evaluate output directories")->required()->check(CLI::ExistingDirectory);

  std::string story_text;
  std::string story_file;
  bool flat = false;
  bool show_assertions = false;
  auto* inspect = app.add_subcommand("inspect", "Print the serialized diagram of a story");
  inspect->add_option("--story", story_text, "Story text (sentences separated by '. ' or newlines)");
  inspect->add_option("--file", story_file, "Story file")->check(CLI::ExistingFile);
  inspect->add_flag("--expand", flat, "Apply the sandwich expansion");
  inspect->add_flag("--assertions", show_assertions, "Also print the question's assertion diagrams");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*generate) return run_generate(*generate, common, gen);
    if (*train_cmd) return run_train(*train_cmd, common, tr);
    if (*evaluate) return run_evaluate(*evaluate, common, ev);
    if (*interpret) return run_interpret(*interpret, common, in);
    if (*report) return run_report(*report, common, report_dirs);
    if (*inspect) return run_inspect(story_text, story_file, flat, show_assertions);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownScheme) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 2;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
