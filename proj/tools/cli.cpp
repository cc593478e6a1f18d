// Copyright 2026 The xforest Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "xforest/data_io.hpp"
#include "xforest/distributed.hpp"
#include "xforest/forest.hpp"
#include "xforest/metrics.hpp"
#include "xforest/model_io.hpp"

namespace xforest {

namespace {

using Json = nlohmann::json;

// Errors caused by bad inputs on disk (exit code 2).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  std::uint32_t trees = 50;
  std::uint32_t k = 10;
  std::uint32_t nleaf = 10;
  std::uint32_t ns = 20000;
  Index proj_dx = 0;
  Index proj_dy = 0;
  Index proj_cap = 10000;
  std::string proj_dx_rule = "feature";
  std::uint32_t kmeans_iters = 20;
  std::uint64_t seed = 1;

  TrainConfig config() const {
    TrainConfig c;
    c.m_F = trees;
    c.k = k;
    c.n_leaf = nleaf;
    c.n_s = ns;
    c.proj_dx = proj_dx;
    c.proj_dy = proj_dy;
    c.proj_cap = proj_cap;
    c.dx_rule = proj_dx_rule == "label" ? ProjectionDimRule::kLabelDim
                                        : ProjectionDimRule::kFeatureDim;
    c.kmeans_iters = kmeans_iters;
    c.master_seed = seed;
    c.validate();
    return c;
  }
};

void add_train_options(CLI::App* app, TrainOptions& o) {
  app->add_option("--trees", o.trees, "Number of trees (m_F)")
      ->check(CLI::PositiveNumber);
  app->add_option("--k", o.k, "Children per internal node")
      ->check(CLI::Range(2u, 1u << 20));
  app->add_option("--nleaf", o.nleaf, "Leaf size threshold")
      ->check(CLI::PositiveNumber);
  app->add_option("--ns", o.ns, "Per-node sample cap")
      ->check(CLI::PositiveNumber);
  app->add_option("--proj-dx", o.proj_dx,
                  "Projected feature dim (0 = min(d_x, cap))");
  app->add_option("--proj-dy", o.proj_dy,
                  "Projected label dim (0 = min(d_y, cap))");
  app->add_option("--proj-cap", o.proj_cap, "Automatic projection dim cap")
      ->check(CLI::PositiveNumber);
  app->add_option("--proj-dx-rule", o.proj_dx_rule,
                  "Automatic feature dim: 'feature' = min(d_x, cap), "
                  "'label' = min(d_y, cap)")
      ->check(CLI::IsMember({"feature", "label"}));
  app->add_option("--kmeans-iters", o.kmeans_iters, "k-means iteration cap")
      ->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "Master seed");
}

Dataset load_data(const std::string& path) {
  try {
    return read_xmlc_file(path);
  } catch (const DataError& e) {
    throw InputError(e.what());
  }
}

ForestModel load_model(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw InputError("model file not found: " + path);
  }
  try {
    return read_model_file(path);
  } catch (const ModelFormatError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || k <= 0) {
      throw std::invalid_argument("--at: bad k value '" + item + "'");
    }
    ks.push_back(k);
  }
  if (ks.empty()) throw std::invalid_argument("--at: no k values");
  return ks;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

Json p_at_json(const EvalReport& r) {
  Json j = Json::object();
  for (const auto& [k, v] : r.p_at) j[std::to_string(k)] = v;
  return j;
}

// key=value lines, '#' comments. Returns the injected flags.
std::vector<std::string> config_flags(const std::string& path,
                                      const std::vector<std::string>& given) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  std::vector<std::string> flags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    const bool overridden =
        std::any_of(given.begin(), given.end(), [&](const std::string& a) {
          return a == flag || a.rfind(flag + "=", 0) == 0;
        });
    if (!overridden) flags.push_back(flag + "=" + value);
  }
  return flags;
}

// Splices flags from --config files right after the subcommand name, so
// explicit flags (parsed later) are the only values for their options.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    auto flags = config_flags(path, args);
    injected.insert(injected.end(), flags.begin(), flags.end());
  }
  if (injected.empty() || out.empty()) return out;
  out.insert(out.begin() + 1, injected.begin(), injected.end());
  return out;
}

struct ClusterOptions {
  std::string role;
  std::uint32_t rank = 0;
  std::string roster;
  std::uint32_t workers = 1;
  int retries = 3;
  double timeout_s = 30.0;
};

void add_cluster_options(CLI::App* app, ClusterOptions& o, bool with_role) {
  if (with_role) {
    app->add_option("--role", o.role, "master or worker")
        ->required()
        ->check(CLI::IsMember({"master", "worker"}));
  }
  app->add_option("--rank", o.rank, "This process's rank (master = 0)");
  app->add_option("--roster", o.roster, "Roster file of 'rank host:port' lines")
      ->required();
  app->add_option("--workers", o.workers, "Worker count P")
      ->check(CLI::PositiveNumber);
  app->add_option("--retries", o.retries, "Connection retries")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--timeout", o.timeout_s, "Master receive timeout (s)")
      ->check(CLI::PositiveNumber);
}

class Commands {
 public:
  Commands(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int train() {
    const TrainConfig cfg = train_opts_.config();
    const Dataset data = load_data(data_path_);
    const ForestTraining t = train_forest(data, cfg, threads_);
    write_model_file(t.model, out_path_);
    const std::size_t bytes = serialize_model(t.model).size();
    double t1 = 0.0;
    double tinf = 0.0;
    for (const WorkSpanReport& w : t.work_span) {
      t1 += w.t1;
      tinf = std::max(tinf, w.tinf);
    }
    if (json_) {
      out_ << Json{{"event", "train"},
                   {"trees", cfg.m_F},
                   {"n", data.n()},
                   {"d_x", data.d_x()},
                   {"d_y", data.d_y()},
                   {"train_seconds", t.seconds},
                   {"model_bytes", bytes},
                   {"work_t1", t1},
                   {"work_tinf_max", tinf},
                   {"model", out_path_}}
                  .dump()
           << "\n";
    } else {
      out_ << "trained " << cfg.m_F << " trees on " << data.n()
           << " instances in " << fixed(t.seconds, 3) << " s\n"
           << "model " << out_path_ << " (" << bytes << " bytes)\n";
    }
    return kExitOk;
  }

  int predict() {
    const ForestModel model = load_model(model_path_);
    const Dataset data = load_data(data_path_);
    if (data.d_x() != model.d_x) {
      throw InputError("data d_x " + std::to_string(data.d_x()) +
                       " does not match model d_x " +
                       std::to_string(model.d_x));
    }
    for (std::size_t i = 0; i < data.n(); ++i) {
      const auto top = predict_forest(model, data.features.row(i), topk_);
      if (json_) {
        Json labels = Json::array();
        Json scores = Json::array();
        for (const ScoredLabel& s : top) {
          labels.push_back(s.label);
          scores.push_back(s.score);
        }
        out_ << Json{{"event", "predict"},
                     {"row", i},
                     {"labels", labels},
                     {"scores", scores}}
                    .dump()
             << "\n";
      } else {
        for (std::size_t j = 0; j < top.size(); ++j) {
          out_ << (j ? " " : "") << top[j].label << ":" << top[j].score;
        }
        out_ << "\n";
      }
    }
    return kExitOk;
  }

  int eval() {
    const ForestModel model = load_model(model_path_);
    const Dataset data = load_data(data_path_);
    check_dims(model, data);
    const std::vector<int> ks = parse_ks(at_);
    const EvalReport r = evaluate(model, data, ks, threads_);
    if (json_) {
      out_ << Json{{"event", "eval"}, {"n_test", r.n_test}, {"p_at", p_at_json(r)}}
                  .dump()
           << "\n";
    } else {
      out_ << "n_test " << r.n_test << "\n";
      for (const auto& [k, v] : r.p_at) {
        out_ << "P@" << k << " " << fixed(100.0 * v, 2) << "\n";
      }
    }
    return kExitOk;
  }

  int bench() {
    const TrainConfig cfg = train_opts_.config();
    const std::vector<int> ks = parse_ks(at_);
    const Dataset train = load_data(data_path_);
    const Dataset test = load_data(test_path_);
    const ForestTraining t = train_forest(train, cfg, threads_);
    check_dims(t.model, test);
    if (!out_path_.empty()) write_model_file(t.model, out_path_);
    const std::size_t bytes = serialize_model(t.model).size();
    const EvalReport r = evaluate(t.model, test, ks, threads_);
    if (json_) {
      out_ << Json{{"event", "bench"},
                   {"trees", cfg.m_F},
                   {"threads", threads_},
                   {"n_train", train.n()},
                   {"n_test", r.n_test},
                   {"train_seconds", t.seconds},
                   {"test_seconds_total", r.predict_seconds},
                   {"test_ms_per_sample", r.predict_ms_per_sample},
                   {"model_bytes", bytes},
                   {"p_at", p_at_json(r)}}
                  .dump()
           << "\n";
    } else {
      out_ << "train_s  test_total_s  test_ms_per_sample  model_bytes";
      for (const auto& [k, v] : r.p_at) out_ << "  P@" << k;
      out_ << "\n"
           << fixed(t.seconds, 3) << "  " << fixed(r.predict_seconds, 3)
           << "  " << fixed(r.predict_ms_per_sample, 4) << "  " << bytes;
      for (const auto& [k, v] : r.p_at) out_ << "  " << fixed(100.0 * v, 2);
      out_ << "\n";
    }
    return kExitOk;
  }

  int cluster(Role role) {
    const TrainConfig cfg = train_opts_.config();
    ClusterConfig cluster;
    cluster.workers = cluster_opts_.workers;
    cluster.role = role;
    cluster.rank = role == Role::kMaster ? 0 : cluster_opts_.rank;
    cluster.retries = cluster_opts_.retries;
    cluster.receive_timeout = std::chrono::milliseconds(
        static_cast<long long>(cluster_opts_.timeout_s * 1000.0));
    try {
      cluster.roster = read_roster_file(cluster_opts_.roster);
    } catch (const std::exception& e) {
      throw InputError(e.what());
    }
    cluster.validate(cfg.m_F);
    return role == Role::kMaster ? master(cfg, cluster) : worker(cfg, cluster);
  }

  void register_commands(CLI::App& app) {
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "Train a forest");
    train->add_option("--data", data_path_, "Training data file")->required();
    train->add_option("--out", out_path_, "Model output path")->required();
    add_train_options(train, train_opts_);
    add_common(train);
    train->callback([this] { run_ = [this] { return this->train(); }; });

    auto* predict = app.add_subcommand("predict", "Rank labels per instance");
    predict->add_option("--model", model_path_, "Model file")->required();
    predict->add_option("--data", data_path_, "Data file")->required();
    predict->add_option("--topk", topk_, "Labels per instance")
        ->check(CLI::PositiveNumber);
    add_common(predict);
    predict->callback([this] { run_ = [this] { return this->predict(); }; });

    auto* eval = app.add_subcommand("eval", "Precision@k of a model");
    eval->add_option("--model", model_path_, "Model file")->required();
    eval->add_option("--data", data_path_, "Test data file")->required();
    eval->add_option("--at", at_, "Comma-separated k values");
    add_common(eval);
    eval->callback([this] { run_ = [this] { return this->eval(); }; });

    auto* bench = app.add_subcommand("bench", "Train, time and evaluate");
    bench->add_option("--data", data_path_, "Training data file")->required();
    bench->add_option("--test", test_path_, "Test data file")->required();
    bench->add_option("--out", out_path_, "Optional model output path");
    bench->add_option("--at", at_, "Comma-separated k values");
    add_train_options(bench, train_opts_);
    add_common(bench);
    bench->callback([this] { run_ = [this] { return this->bench(); }; });

    auto* worker = app.add_subcommand("worker", "Train a tree range, send to master");
    add_worker_options(worker, false);
    worker->callback([this] {
      run_ = [this] { return this->cluster(Role::kWorker); };
    });

    auto* master = app.add_subcommand("master", "Gather trees from workers");
    add_master_options(master, false);
    master->callback([this] {
      run_ = [this] { return this->cluster(Role::kMaster); };
    });

    auto* node = app.add_subcommand("cluster", "worker or master by --role");
    node->add_option("--data", data_path_, "Training data file (workers)");
    node->add_option("--out", out_path_, "Model output path (master)");
    add_train_options(node, train_opts_);
    add_cluster_options(node, cluster_opts_, true);
    add_common(node);
    node->callback([this] {
      const Role role =
          cluster_opts_.role == "master" ? Role::kMaster : Role::kWorker;
      if (role == Role::kWorker && data_path_.empty()) {
        throw CLI::RequiredError("--data");
      }
      run_ = [this, role] { return this->cluster(role); };
    });
  }

  int run() { return run_(); }

 private:
  void add_common(CLI::App* app) {
    app->add_option("--threads", threads_, "Worker threads")
        ->check(CLI::PositiveNumber);
    app->add_flag("--json", json_, "Emit JSON lines");
    // Handled before parsing; declared for --help.
    app->add_option("--config", config_unused_, "key=value config file");
  }

  void add_worker_options(CLI::App* app, bool with_role) {
    app->add_option("--data", data_path_, "Training data file")->required();
    add_train_options(app, train_opts_);
    add_cluster_options(app, cluster_opts_, with_role);
    add_common(app);
  }

  void add_master_options(CLI::App* app, bool with_role) {
    app->add_option("--out", out_path_, "Model output path")->required();
    add_train_options(app, train_opts_);
    add_cluster_options(app, cluster_opts_, with_role);
    add_common(app);
  }

  void check_dims(const ForestModel& model, const Dataset& data) const {
    if (data.d_x() != model.d_x || data.d_y() != model.d_y) {
      throw InputError("data dims (" + std::to_string(data.d_x()) + ", " +
                       std::to_string(data.d_y()) +
                       ") do not match model dims (" +
                       std::to_string(model.d_x) + ", " +
                       std::to_string(model.d_y) + ")");
    }
  }

  int worker(const TrainConfig& cfg, const ClusterConfig& cluster) {
    const Dataset data = load_data(data_path_);
    auto transport = SocketTransport::client(cluster.rank, cluster.roster);
    const WorkerResult r = run_worker(data, cfg, cluster, *transport, threads_);
    if (json_) {
      out_ << Json{{"event", "worker"},
                   {"rank", cluster.rank},
                   {"first_tree", r.first_tree},
                   {"last_tree", r.last_tree},
                   {"payload_bytes", r.payload_bytes},
                   {"train_seconds", r.stats.phase_seconds.at("train")},
                   {"send_seconds", r.stats.phase_seconds.at("send")}}
                  .dump()
           << "\n";
    } else {
      out_ << "worker " << cluster.rank << " trained trees [" << r.first_tree
           << ", " << r.last_tree << ") and sent " << r.payload_bytes
           << " bytes\n";
    }
    return kExitOk;
  }

  int master(const TrainConfig& cfg, const ClusterConfig& cluster) {
    const auto self = std::find_if(
        cluster.roster.begin(), cluster.roster.end(),
        [](const PeerAddress& a) { return a.rank == 0; });
    if (self == cluster.roster.end()) {
      throw InputError("roster has no rank 0 entry for the master");
    }
    auto transport = SocketTransport::listen(0, *self);
    if (json_) {
      out_ << Json{{"event", "listening"}, {"port", transport->port()}}.dump()
           << "\n";
    } else {
      out_ << "listening on port " << transport->port() << "\n";
    }
    out_.flush();
    const MasterResult r = run_master(cfg, cluster, *transport);
    write_model_file(r.model, out_path_);
    const std::size_t bytes = serialize_model(r.model).size();
    const CommReport report =
        comm_report(r.stats, cluster.workers, r.tree_block_bytes, bytes);
    if (json_) {
      Json j = Json::parse(report.to_json());
      j["event"] = "master";
      j["gather_seconds"] = r.stats.phase_seconds.at("gather");
      j["reduce_seconds"] = r.stats.phase_seconds.at("reduce");
      j["model"] = out_path_;
      out_ << j.dump() << "\n";
    } else {
      out_ << "gathered " << report.messages << " messages (predicted "
           << report.predicted_messages << "), " << report.bytes
           << " payload bytes (predicted " << report.predicted_bytes << ")\n"
           << "gather " << fixed(r.stats.phase_seconds.at("gather"), 3)
           << " s, reduce " << fixed(r.stats.phase_seconds.at("reduce"), 3)
           << " s\nmodel " << out_path_ << " (" << bytes << " bytes)\n";
    }
    return report.consistent() ? kExitOk : kExitRuntime;
  }

  std::ostream& out_;
  std::ostream& err_;
  std::function<int()> run_;
  TrainOptions train_opts_;
  ClusterOptions cluster_opts_;
  std::string data_path_;
  std::string test_path_;
  std::string out_path_;
  std::string model_path_;
  std::string at_ = "1,3,5";
  std::string config_unused_;
  std::size_t topk_ = 5;
  std::size_t threads_ = 1;
  bool json_ = false;
};

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Extreme multi-label forest training and evaluation", "xforest"};
  Commands commands(out, err);
  commands.register_commands(app);
  try {
    std::vector<std::string> argv = expand_config(args);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    return commands.run();
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace xforest
