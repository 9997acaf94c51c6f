#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "lvgpt/checkpoint.hpp"
#include "lvgpt/error.hpp"
#include "lvgpt/harness.hpp"
#include "lvgpt/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace lvgpt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

class Harness : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new lvgpt::testing::TempDir();
        SyntheticSpec spec;
        spec.image_size = 16;
        spec.n_train = 33;
        spec.n_test = 22;
        spec.holdout_last_template = true;
        spec.seed = 3;
        data_ = new SyntheticData(generate_synthetic(spec, dir_->path() / "data"));
    }
    static void TearDownTestSuite() {
        delete data_;
        delete dir_;
    }

    RunConfig small(const std::string& out) const {
        RunConfig c = default_run_config(Profile::desk);
        c.model.d = 16;
        c.model.n_layers = 1;
        c.model.n_heads = 2;
        c.model.mlp_ratio = 2;
        c.model.tokenizer.image_size = 16;
        c.model.tokenizer.token_dim = 16;
        c.epochs = 1;
        c.batch_size = 8;
        c.train_manifest = data_->train_manifest.string();
        c.test_manifest = data_->test_manifest.string();
        c.out_dir = (dir_->path() / out).string();
        return c;
    }

    static lvgpt::testing::TempDir* dir_;
    static SyntheticData* data_;
};

lvgpt::testing::TempDir* Harness::dir_ = nullptr;
SyntheticData* Harness::data_ = nullptr;

TEST_F(Harness, ZeroEpochsStoresInitialization) {
    auto cfg = small("zero");
    cfg.epochs = 0;
    const auto r = run_training(cfg);
    ASSERT_EQ(r.history.size(), 1u);
    EXPECT_EQ(r.history[0].epoch, 0u);

    const auto ckpt = read_checkpoint(r.checkpoint);
    const auto resolved = parse_run_config(ckpt.config_text);
    auto fresh = init_params<float>(resolved.model, resolved.seed);
    EXPECT_EQ(store_parameters(fresh), ckpt.tensors);
    EXPECT_EQ(ckpt.labels, synthetic_label_map(SyntheticSpec{}).names());
    EXPECT_EQ(resolved.model.num_classes, 11u);
    EXPECT_EQ(resolved.model.vocab_size, ckpt.vocab.size());
}

TEST_F(Harness, OutputsAndDeterminism) {
    auto cfg = small("det_a");
    cfg.epochs = 2;
    cfg.precision = Precision::f64;
    const auto a = run_training(cfg);
    cfg.out_dir = (dir_->path() / "det_b").string();
    const auto b = run_training(cfg);

    const auto rows = lines_of(fs::path(cfg.out_dir) / "metrics.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], "epoch,train_loss,train_acc,val_loss,val_acc,val_recall,val_fscore");
    EXPECT_EQ(rows[1].substr(0, 2), "0,");
    EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "config.txt"));
    EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "eval_test.csv"));
    EXPECT_EQ(read_checkpoint(a.checkpoint).tensors, read_checkpoint(b.checkpoint).tensors);
    EXPECT_EQ(slurp(fs::path(cfg.out_dir) / "metrics.csv"), slurp(dir_->path() / "det_a" / "metrics.csv"));
    for (const auto& rec : a.history) {
        EXPECT_TRUE(rec.val_acc.has_value());
        EXPECT_GE(rec.train_acc, 0.0);
        EXPECT_LE(rec.train_acc, 1.0);
    }
    EXPECT_EQ(a.test_report->confusion.total(), 22u);
}

TEST_F(Harness, EvalReproducesTrainingReport) {
    const auto r = run_training(small("evalme"));
    EvalOptions opts;
    opts.checkpoint = r.checkpoint;
    opts.data = data_->test_manifest;
    opts.rephrased = true;
    opts.out_dir = dir_->path() / "evalme_out";
    const auto e1 = run_eval(opts);
    EXPECT_EQ(e1.report.confusion, r.test_report->confusion);
    EXPECT_EQ(e1.report.overall, r.test_report->overall);
    ASSERT_TRUE(e1.rephrased.has_value());
    EXPECT_EQ(e1.rephrased->confusion.total(), 22u);

    opts.threads = 3;
    const auto e3 = run_eval(opts);
    EXPECT_EQ(e3.report.confusion, e1.report.confusion);

    const auto rows = lines_of(opts.out_dir / "eval.csv");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0], "block,scope,count,acc,recall,fscore");
    bool saw_rephrased = false;
    for (const auto& row : rows) saw_rephrased |= row.rfind("rephrased,", 0) == 0;
    EXPECT_TRUE(saw_rephrased);
}

TEST_F(Harness, EvalRejectsForeignLabelMap) {
    const auto r = run_training([&] {
        auto c = small("labels");
        c.epochs = 0;
        return c;
    }());
    const auto path = dir_->path() / "other_labels.tsv";
    auto names = synthetic_label_map(SyntheticSpec{}).names();
    std::swap(names[0], names[1]);
    LabelMap(names).write(path);
    EvalOptions opts;
    opts.checkpoint = r.checkpoint;
    opts.data = data_->test_manifest;
    opts.label_map = path;
    EXPECT_THROW(run_eval(opts), CheckpointError);

    opts.label_map.clear();
    opts.checkpoint = dir_->path() / "missing.lvgp";
    EXPECT_THROW(run_eval(opts), CheckpointError);
}

TEST_F(Harness, ConfigAndDataErrors) {
    auto c = small("err");
    c.train_manifest.clear();
    EXPECT_THROW(run_training(c), ConfigError);
    c = small("err");
    c.batch_size = 0;
    EXPECT_THROW(run_training(c), ConfigError);
    c = small("err");
    c.train_manifest = (dir_->path() / "nope.jsonl").string();
    EXPECT_THROW(run_training(c), DataError);
    c = small("err");
    c.model.tokenizer.image_size = 32;
    c.model.tokenizer.token_dim = 16;
    EXPECT_THROW(run_training(c), DataError);
}

TEST_F(Harness, AblationGridParsing) {
    const auto g = parse_ablation_grid("order=early_word,early_vision;pose=zero,actual");
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[1].values, (std::vector<std::string>{"zero", "actual"}));
    EXPECT_EQ(ablation_config_key("pose"), "seq.vision_pose");
    EXPECT_EQ(ablation_config_key("model.d"), "model.d");
    EXPECT_EQ(default_ablation_grid().size(), 3u);
    EXPECT_THROW(parse_ablation_grid(""), ConfigError);
    EXPECT_THROW(parse_ablation_grid("order="), ConfigError);
    EXPECT_THROW(parse_ablation_grid("order=a;order=b"), ConfigError);
    EXPECT_THROW(parse_ablation_grid("flavour=a,b"), ConfigError);
}

TEST_F(Harness, AblationRunsEveryCellAndWritesContrasts) {
    auto base = small("abl_base");
    base.epochs = 0;
    const auto out = dir_->path() / "abl";
    const auto rep = run_ablation(base, parse_ablation_grid("order=early_word,early_vision;pose=zero,actual"), out);
    ASSERT_EQ(rep.cells.size(), 4u);
    for (const auto& c : rep.cells) EXPECT_TRUE(c.ok) << c.error;
    EXPECT_EQ(rep.cells[1].order, "early_word");
    EXPECT_EQ(rep.cells[1].pose_mode, "actual");
    for (const auto& c : rep.contrasts) EXPECT_DOUBLE_EQ(c.delta_acc, c.a.acc - c.b.acc);

    std::size_t overall = 0;
    for (const auto& c : rep.contrasts) overall += c.scope == "overall";
    EXPECT_EQ(overall, 4u);  // two pairs per axis
    EXPECT_TRUE(fs::exists(out / "contrast_order.csv"));
    EXPECT_TRUE(fs::exists(out / "contrast_pose.csv"));
    EXPECT_NE(slurp(out / "summary.txt").find("mean delta acc"), std::string::npos);
    EXPECT_EQ(lines_of(out / "ablation.csv")[0],
              "order,pose_mode,backend,type_embedding,status,scope,count,acc,recall,fscore,error");
}

TEST_F(Harness, FailingCellDoesNotStopTheGrid) {
    auto base = small("abl_fail");
    base.epochs = 0;
    const auto out = dir_->path() / "abl_fail";
    const auto rep = run_ablation(base, parse_ablation_grid("model.heads=2,3"), out);
    ASSERT_EQ(rep.cells.size(), 2u);
    EXPECT_TRUE(rep.cells[0].ok);
    EXPECT_FALSE(rep.cells[1].ok);
    EXPECT_FALSE(rep.cells[1].error.empty());
    EXPECT_NE(slurp(out / "ablation.csv").find("failed"), std::string::npos);
}

}  // namespace
