#include "lvgpt/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "lvgpt/checkpoint.hpp"
#include "lvgpt/dataset.hpp"
#include "lvgpt/error.hpp"
#include "lvgpt/image.hpp"
#include "lvgpt/model.hpp"
#include "lvgpt/ops.hpp"
#include "lvgpt/vocab.hpp"

namespace lvgpt {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v, "%.9g") : std::string(); }

template <typename T>
struct PreparedSplit {
    std::vector<SampleInput<T>> inputs;
    std::vector<std::string> types;
};

template <typename T>
PreparedSplit<T> prepare(const VQADataset& ds, const Vocabulary& vocab, const ModelConfig& mc) {
    PreparedSplit<T> out;
    out.inputs.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        const RgbImage img = read_ppm(s.image_path);
        if (img.width != mc.tokenizer.image_size || img.height != mc.tokenizer.image_size) {
            throw DataError(s.image_path.string() + ": image is " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + ", model expects " +
                            std::to_string(mc.tokenizer.image_size) + " pixels square");
        }
        out.inputs.push_back({image_to_tensor<T>(img), tokenize_question(s.question, vocab, mc.max_question_len),
                              s.answer_class});
        out.types.push_back(s.question_type);
    }
    return out;
}

struct Evaluation {
    double loss = 0.0;
    std::vector<std::int64_t> preds;
    MetricsReport report;
};

// Forward-only pass over a frozen model, sharded over threads. Per-sample
// results land in fixed slots, so the outcome does not depend on threads.
template <typename T>
Evaluation evaluate(const LVGPTModel<T>& model, const PreparedSplit<T>& split, std::size_t threads) {
    const std::size_t n = split.inputs.size();
    Evaluation ev;
    if (n == 0) return ev;
    std::vector<std::int64_t> preds(n);
    std::vector<double> losses(n);
    auto work = [&](std::size_t begin, std::size_t end) {
        NoGradGuard no_grad;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& s = split.inputs[i];
            auto logits = forward_logits(model, s.image, s.question_ids);
            preds[i] = argmax<T>(logits.data());
            const std::int64_t label[1] = {s.label};
            losses[i] = static_cast<double>(cross_entropy(logits, std::span<const std::int64_t>(label)).item());
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, n);
    if (threads == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk, e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
    ev.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
    std::vector<std::int64_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = split.inputs[i].label;
    ev.report = compute_metrics(preds, labels, split.types, model.config.num_classes);
    ev.preds = std::move(preds);
    return ev;
}

fs::path label_map_for(const std::string& configured, const fs::path& manifest) {
    return configured.empty() ? default_label_map_path(manifest) : fs::path(configured);
}

void write_metrics_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch,train_loss,train_acc,val_loss,val_acc,val_recall,val_fscore\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << fmt(r.train_loss, "%.9g") << ',' << fmt(r.train_acc, "%.9g") << ','
            << fmt_opt(r.val_loss) << ',' << fmt_opt(r.val_acc) << ',' << fmt_opt(r.val_recall) << ','
            << fmt_opt(r.val_fscore) << '\n';
    }
}

void write_report_rows(std::ostream& out, const std::string& block, const MetricsReport& r) {
    auto row = [&](const std::string& scope, const MetricSummary& m) {
        out << block << ',' << scope << ',' << m.count << ',' << fmt(m.acc) << ',' << fmt(m.macro_recall) << ','
            << fmt(m.macro_fscore) << '\n';
    };
    row("overall", r.overall);
    for (const auto& [type, m] : r.per_type) row(type, m);
}

void write_eval_csv(const fs::path& path, const std::vector<std::pair<std::string, const MetricsReport*>>& blocks) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "block,scope,count,acc,recall,fscore\n";
    for (const auto& [name, r] : blocks) write_report_rows(out, name, *r);
}

template <typename T>
TrainResult train_impl(const RunConfig& cfg, std::ostream* log) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.train_manifest.empty()) throw ConfigError("data.train is not set");
    if (cfg.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");

    const fs::path train_path = cfg.train_manifest;
    const fs::path labels_path = label_map_for(cfg.label_map, train_path);
    const VQADataset train_ds = load_dataset(train_path, labels_path);
    if (train_ds.samples.empty()) throw DataError(train_path.string() + ": no training samples");
    std::optional<VQADataset> test_ds;
    if (!cfg.test_manifest.empty()) test_ds = load_dataset(cfg.test_manifest, labels_path);

    std::vector<std::string> questions;
    for (const auto& s : train_ds.samples) questions.push_back(s.question);
    const Vocabulary vocab = Vocabulary::build(questions, cfg.vocab_min_count);

    RunConfig resolved = cfg;
    resolved.model.vocab_size = vocab.size();
    resolved.model.num_classes = train_ds.labels.size();
    resolved.model.validate();

    LVGPTModel<T> model = init_params<T>(resolved.model, resolved.seed);
    const auto train = prepare<T>(train_ds, vocab, resolved.model);
    std::optional<PreparedSplit<T>> test;
    if (test_ds) test = prepare<T>(*test_ds, vocab, resolved.model);

    const fs::path out_dir = resolved.out_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    if (log) {
        *log << "training " << model.parameter_count() << " parameters (" << to_string(resolved.precision) << ", "
             << to_string(resolved.model.tokenizer.backend) << ", " << to_string(resolved.model.sequencing.order)
             << ", pose " << to_string(resolved.model.sequencing.vision_pose) << ") on " << train.inputs.size()
             << " samples\n";
    }

    TrainResult result;
    auto record = [&](std::size_t epoch, double train_loss, const Evaluation& tr, const std::optional<Evaluation>& te) {
        EpochRecord r;
        r.epoch = epoch;
        r.train_loss = train_loss;
        r.train_acc = tr.report.overall.acc;
        if (te) {
            r.val_loss = te->loss;
            r.val_acc = te->report.overall.acc;
            r.val_recall = te->report.overall.macro_recall;
            r.val_fscore = te->report.overall.macro_fscore;
        }
        if (log) {
            *log << "epoch " << epoch << "  loss " << fmt(train_loss) << "  train_acc " << fmt(r.train_acc, "%.4f");
            if (te) *log << "  val_loss " << fmt(*r.val_loss) << "  val_acc " << fmt(*r.val_acc, "%.4f");
            *log << "\n";
            log->flush();
        }
        result.history.push_back(r);
    };

    auto eval_all = [&] {
        Evaluation tr = evaluate(model, train, resolved.eval_threads);
        std::optional<Evaluation> te;
        if (test) te = evaluate(model, *test, resolved.eval_threads);
        return std::make_pair(std::move(tr), std::move(te));
    };

    auto [tr0, te0] = eval_all();
    record(0, tr0.loss, tr0, te0);
    Evaluation last_train = std::move(tr0);
    std::optional<Evaluation> last_test = std::move(te0);

    AdamState<T> opt(resolved.optim);
    std::mt19937_64 shuffle_rng(resolved.seed ^ 0x9e3779b97f4a7c15ULL);
    std::mt19937_64 dropout_rng(resolved.seed + 1);
    ForwardContext ctx{true, &dropout_rng};
    std::vector<std::size_t> order(train.inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<SampleInput<T>> batch;

    for (std::size_t epoch = 1; epoch <= resolved.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += resolved.batch_size) {
            batch.clear();
            for (std::size_t i = b; i < std::min(order.size(), b + resolved.batch_size); ++i)
                batch.push_back(train.inputs[order[i]]);
            const T loss = train_step(std::span<const SampleInput<T>>(batch), model, opt, ctx);
            loss_sum += static_cast<double>(loss) * static_cast<double>(batch.size());
        }
        auto [tr, te] = eval_all();
        record(epoch, loss_sum / static_cast<double>(order.size()), tr, te);
        last_train = std::move(tr);
        last_test = std::move(te);
    }

    Checkpoint ckpt;
    ckpt.config_text = serialize_run_config(resolved);
    ckpt.vocab = vocab.tokens();
    ckpt.labels = train_ds.labels.names();
    ckpt.tensors = store_parameters(model);
    result.checkpoint = out_dir / "model.lvgp";
    write_checkpoint(result.checkpoint, ckpt);
    write_metrics_csv(out_dir / "metrics.csv", result.history);
    {
        std::ofstream c(out_dir / "config.txt");
        c << ckpt.config_text;
    }
    result.train_report = last_train.report;
    if (last_test) {
        result.test_report = last_test->report;
        write_eval_csv(out_dir / "eval_test.csv", {{"default", &*result.test_report}});
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

template <typename T>
EvalResult eval_impl(const EvalOptions& opts, const Checkpoint& ckpt, const RunConfig& cfg, std::ostream* log) {
    const Vocabulary vocab = Vocabulary::from_tokens(ckpt.vocab);
    const LabelMap labels(ckpt.labels);
    if (vocab.size() != cfg.model.vocab_size || labels.size() != cfg.model.num_classes) {
        throw CheckpointError("checkpoint vocabulary/classes disagree with its config block");
    }
    LVGPTModel<T> model = init_params<T>(cfg.model, 0);
    load_parameters(model, ckpt.tensors);

    auto run = [&](const fs::path& manifest) {
        const fs::path lm = opts.label_map.empty() ? default_label_map_path(manifest) : opts.label_map;
        const VQADataset ds = load_dataset(manifest, lm);
        if (!(ds.labels == labels)) {
            throw CheckpointError("label map " + lm.string() + " does not match the checkpoint's classes");
        }
        if (ds.samples.empty()) throw DataError(manifest.string() + ": no samples to evaluate");
        return evaluate(model, prepare<T>(ds, vocab, cfg.model), opts.threads).report;
    };

    EvalResult r;
    r.report = run(opts.data);
    if (log) print_metrics(*log, "default queries (" + opts.data.string() + ")", r.report);
    if (opts.rephrased) {
        const fs::path rp =
            opts.rephrased_data.empty() ? opts.data.parent_path() / "test_rephrased.jsonl" : opts.rephrased_data;
        r.rephrased = run(rp);
        if (log) {
            print_metrics(*log, "rephrased queries (" + rp.string() + ")", *r.rephrased);
            *log << "rephrased - default accuracy: " << fmt(r.rephrased->overall.acc - r.report.overall.acc, "%+.4f")
                 << "\n";
        }
    }
    if (!opts.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(opts.out_dir, ec);
        std::vector<std::pair<std::string, const MetricsReport*>> blocks{{"default", &r.report}};
        if (r.rephrased) blocks.emplace_back("rephrased", &*r.rephrased);
        write_eval_csv(opts.out_dir / "eval.csv", blocks);
    }
    return r;
}

const std::map<std::string, std::string>& axis_aliases() {
    static const std::map<std::string, std::string> a{
        {"order", "seq.order"},
        {"pose", "seq.vision_pose"},
        {"backend", "vision.backend"},
        {"type_embedding", "seq.type_embedding"},
    };
    return a;
}

std::string sign_of(double d) { return d > 0 ? "+" : (d < 0 ? "-" : "0"); }

}  // namespace

TrainResult run_training(const RunConfig& cfg, std::ostream* log) {
    return cfg.precision == Precision::f64 ? train_impl<double>(cfg, log) : train_impl<float>(cfg, log);
}

EvalResult run_eval(const EvalOptions& opts, std::ostream* log) {
    const Checkpoint ckpt = read_checkpoint(opts.checkpoint);
    RunConfig cfg;
    try {
        cfg = parse_run_config(ckpt.config_text);
        cfg.model.validate();
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint config block is invalid: ") + e.what());
    }
    if (ckpt.tensors.empty()) throw CheckpointError("checkpoint holds no tensors");
    return ckpt.tensors.front().dtype == DType::f64 ? eval_impl<double>(opts, ckpt, cfg, log)
                                                    : eval_impl<float>(opts, ckpt, cfg, log);
}

AblationGrid default_ablation_grid() {
    return {{"order", {"early_word", "early_vision"}}, {"pose", {"zero", "actual"}}, {"backend", {"cnn_lite", "vit_lite"}}};
}

std::string ablation_config_key(std::string_view axis) {
    auto it = axis_aliases().find(std::string(axis));
    return it == axis_aliases().end() ? std::string(axis) : it->second;
}

AblationGrid parse_ablation_grid(std::string_view text) {
    AblationGrid grid;
    std::set<std::string> seen;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(';', start), text.size());
        std::string part(text.substr(start, end - start));
        start = end + 1;
        part.erase(std::remove_if(part.begin(), part.end(), [](unsigned char c) { return std::isspace(c); }), part.end());
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("ablation grid: expected 'axis=v1,v2' in '" + part + "'");
        AblationAxis axis{part.substr(0, eq), {}};
        const std::string key = ablation_config_key(axis.name);
        if (std::find(run_config_keys().begin(), run_config_keys().end(), key) == run_config_keys().end()) {
            throw ConfigError("ablation grid: unknown axis '" + axis.name + "'");
        }
        if (!seen.insert(key).second) throw ConfigError("ablation grid: axis '" + axis.name + "' repeated");
        std::string values = part.substr(eq + 1);
        std::size_t vs = 0;
        while (vs <= values.size()) {
            const auto ve = std::min(values.find(',', vs), values.size());
            if (ve > vs) axis.values.push_back(values.substr(vs, ve - vs));
            vs = ve + 1;
        }
        if (axis.values.empty()) throw ConfigError("ablation grid: axis '" + axis.name + "' has no values");
        grid.push_back(std::move(axis));
    }
    if (grid.empty()) throw ConfigError("ablation grid is empty");
    return grid;
}

AblationReport run_ablation(const RunConfig& base, const AblationGrid& grid, const fs::path& out_dir,
                            std::ostream* log) {
    if (grid.empty()) throw ConfigError("ablation grid is empty");
    AblationReport report;
    std::vector<std::size_t> idx(grid.size(), 0);
    for (bool more = true; more;) {
        AblationCell cell;
        RunConfig cfg = base;
        std::string name;
        for (std::size_t a = 0; a < grid.size(); ++a) {
            const auto& value = grid[a].values[idx[a]];
            cell.settings[grid[a].name] = value;
            name += (a ? "-" : "") + value;
        }
        cfg.out_dir = (out_dir / "cells" / name).string();
        try {
            for (std::size_t a = 0; a < grid.size(); ++a)
                apply_setting(cfg, ablation_config_key(grid[a].name), grid[a].values[idx[a]]);
            if (cfg.test_manifest.empty()) throw ConfigError("ablation needs data.test for held-out metrics");
            if (log) *log << "== cell " << name << "\n";
            auto r = run_training(cfg, log);
            cell.report = *r.test_report;
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
            if (log) *log << "cell " << name << " failed: " << e.what() << "\n";
        }
        cell.order = get_setting(cfg, "seq.order");
        cell.pose_mode = get_setting(cfg, "seq.vision_pose");
        cell.backend = get_setting(cfg, "vision.backend");
        cell.type_embedding = get_setting(cfg, "seq.type_embedding");
        report.cells.push_back(std::move(cell));

        more = false;
        for (std::size_t a = grid.size(); a-- > 0;) {
            if (++idx[a] < grid[a].values.size()) {
                more = true;
                break;
            }
            idx[a] = 0;
        }
    }

    // Pairwise contrasts along every two-valued axis, other axes held fixed.
    for (std::size_t a = 0; a < grid.size(); ++a) {
        if (grid[a].values.size() != 2) continue;
        const auto& axis = grid[a];
        for (const auto& first : report.cells) {
            if (first.settings.at(axis.name) != axis.values[0]) continue;
            for (const auto& second : report.cells) {
                if (second.settings.at(axis.name) != axis.values[1]) continue;
                bool same_rest = true;
                for (const auto& other : grid)
                    if (other.name != axis.name && first.settings.at(other.name) != second.settings.at(other.name))
                        same_rest = false;
                if (!same_rest || !first.ok || !second.ok) continue;
                auto add = [&](const std::string& scope, const MetricSummary& x, const MetricSummary& y) {
                    AblationContrast c;
                    c.axis = axis.name;
                    c.first = axis.values[0];
                    c.second = axis.values[1];
                    for (const auto& [k, v] : first.settings)
                        if (k != axis.name) c.fixed[k] = v;
                    c.scope = scope;
                    c.a = x;
                    c.b = y;
                    c.delta_acc = x.acc - y.acc;
                    c.delta_recall = x.macro_recall - y.macro_recall;
                    c.delta_fscore = x.macro_fscore - y.macro_fscore;
                    report.contrasts.push_back(std::move(c));
                };
                add("overall", first.report.overall, second.report.overall);
                for (const auto& [type, m] : first.report.per_type) {
                    auto it = second.report.per_type.find(type);
                    if (it != second.report.per_type.end()) add(type, m, it->second);
                }
            }
        }
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());
    {
        std::ofstream out(out_dir / "ablation.csv");
        out << "order,pose_mode,backend,type_embedding,status,scope,count,acc,recall,fscore,error\n";
        for (const auto& c : report.cells) {
            const std::string head = c.order + ',' + c.pose_mode + ',' + c.backend + ',' + c.type_embedding + ',';
            if (!c.ok) {
                std::string err = c.error;
                std::replace(err.begin(), err.end(), ',', ';');
                std::replace(err.begin(), err.end(), '\n', ' ');
                out << head << "failed,overall,,,,," << err << '\n';
                continue;
            }
            auto row = [&](const std::string& scope, const MetricSummary& m) {
                out << head << "ok," << scope << ',' << m.count << ',' << fmt(m.acc) << ',' << fmt(m.macro_recall)
                    << ',' << fmt(m.macro_fscore) << ",\n";
            };
            row("overall", c.report.overall);
            for (const auto& [type, m] : c.report.per_type) row(type, m);
        }
    }
    std::ofstream summary(out_dir / "summary.txt");
    summary << "cells: " << report.cells.size() << " ("
            << std::count_if(report.cells.begin(), report.cells.end(), [](const auto& c) { return c.ok; })
            << " ok)\n";
    for (const auto& c : report.cells)
        if (!c.ok) summary << "failed cell " << c.order << "/" << c.pose_mode << "/" << c.backend << ": " << c.error << "\n";
    for (const auto& axis : grid) {
        if (axis.values.size() != 2) continue;
        std::ofstream out(out_dir / ("contrast_" + axis.name + ".csv"));
        std::vector<std::string> fixed_names;
        for (const auto& other : grid)
            if (other.name != axis.name) fixed_names.push_back(other.name);
        for (const auto& n : fixed_names) out << n << ',';
        const auto& f = axis.values[0];
        const auto& s = axis.values[1];
        out << "scope," << f << "_acc," << f << "_recall," << f << "_fscore," << s << "_acc," << s << "_recall," << s
            << "_fscore,delta_acc,delta_recall,delta_fscore,sign\n";
        double sum = 0.0;
        std::size_t n = 0;
        summary << "\n" << axis.name << ": delta = " << f << " - " << s << "\n";
        for (const auto& c : report.contrasts) {
            if (c.axis != axis.name) continue;
            for (const auto& fn : fixed_names) out << c.fixed.at(fn) << ',';
            out << c.scope << ',' << fmt(c.a.acc) << ',' << fmt(c.a.macro_recall) << ',' << fmt(c.a.macro_fscore) << ','
                << fmt(c.b.acc) << ',' << fmt(c.b.macro_recall) << ',' << fmt(c.b.macro_fscore) << ','
                << fmt(c.delta_acc, "%+.6f") << ',' << fmt(c.delta_recall, "%+.6f") << ','
                << fmt(c.delta_fscore, "%+.6f") << ',' << sign_of(c.delta_acc) << '\n';
            if (c.scope != "overall") continue;
            sum += c.delta_acc;
            ++n;
            summary << "  [";
            bool first = true;
            for (const auto& [k, v] : c.fixed) {
                summary << (first ? "" : ", ") << k << "=" << v;
                first = false;
            }
            summary << "] acc " << fmt(c.a.acc, "%.4f") << " vs " << fmt(c.b.acc, "%.4f") << "  delta "
                    << fmt(c.delta_acc, "%+.4f") << " (" << sign_of(c.delta_acc) << ")\n";
        }
        if (n > 0) {
            const double mean = sum / static_cast<double>(n);
            summary << "  mean delta acc over " << n << " pairs: " << fmt(mean, "%+.4f") << " (" << sign_of(mean) << ")\n";
        }
    }
    summary.close();
    if (log) {
        std::ifstream in(out_dir / "summary.txt");
        *log << in.rdbuf();
    }
    return report;
}

void print_metrics(std::ostream& os, std::string_view title, const MetricsReport& r) {
    os << title << "\n";
    os << "  scope            count     acc  recall  fscore\n";
    auto row = [&](const std::string& scope, const MetricSummary& m) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "  %-14s %7zu  %6.4f  %6.4f  %6.4f\n", scope.c_str(), m.count, m.acc,
                      m.macro_recall, m.macro_fscore);
        os << buf;
    };
    row("overall", r.overall);
    for (const auto& [type, m] : r.per_type) row(type, m);
}

}  // namespace lvgpt
