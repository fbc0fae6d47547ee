// blockscramble: keys, scrambling, key-space counts, dataset preparation and
// adaptation-network training from the command line.
//
// Exit codes: 0 ok, 2 usage, 3 data/format/dimension, 4 numeric failure.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blockscramble/checkpoint.hpp"
#include "blockscramble/dataio.hpp"
#include "blockscramble/gradcheck.hpp"
#include "blockscramble/keying.hpp"
#include "blockscramble/scramble.hpp"
#include "blockscramble/trainer.hpp"

namespace fs = std::filesystem;
using namespace blockscramble;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

CifarVariant parse_variant(const std::string& s) {
    if (s == "cifar10") return CifarVariant::Cifar10;
    if (s == "cifar100") return CifarVariant::Cifar100;
    throw UsageError("unknown dataset variant '" + s + "' (cifar10 or cifar100)");
}

std::optional<AdaptMode> parse_adapt(const std::string& s) {
    if (s == "none") return std::nullopt;
    if (s == "LE" || s == "le") return AdaptMode::LE;
    if (s == "ELE" || s == "ele") return AdaptMode::ELE;
    throw UsageError("unknown adaptation mode '" + s + "' (none, LE or ELE)");
}

SchemeId scheme_arg(const std::string& s) {
    try {
        return parse_scheme(s);
    } catch (const SchemeError& e) {
        throw UsageError(e.what());
    }
}

// ---------------------------------------------------------------------------

struct DataArgs {
    std::vector<std::string> files;
    std::string variant = "cifar10";
    std::size_t per_class = SIZE_MAX;
};

void add_data_flags(CLI::App* cmd, DataArgs& a, const std::string& files_flag,
                    const std::string& per_class_flag, const std::string& what) {
    cmd->add_option(files_flag, a.files, what + " CIFAR binary file(s)");
    cmd->add_option(per_class_flag, a.per_class, "Keep at most this many images per class");
}

std::vector<LabeledExample> load(const DataArgs& a, CifarVariant variant,
                                 const std::vector<std::size_t>& classes,
                                 std::vector<DatasetManifest>* manifests) {
    std::vector<LabeledExample> all;
    for (const auto& f : a.files) {
        auto part = read_cifar(f, variant);
        std::move(part.begin(), part.end(), std::back_inserter(all));
        const fs::path mp = manifest_path(f);
        if (manifests && fs::exists(mp)) {
            std::ifstream in(mp);
            std::stringstream ss;
            ss << in.rdbuf();
            manifests->push_back(parse_manifest(ss.str()));
        }
    }
    if (classes.empty()) {
        if (a.per_class == SIZE_MAX) return all;
        std::vector<std::size_t> every(cifar_classes(variant));
        for (std::size_t k = 0; k < every.size(); ++k) every[k] = k;
        return select_classes(all, every, a.per_class);
    }
    return select_classes(all, classes, a.per_class);
}

std::vector<LabeledExample> scrambled_copy(std::span<const LabeledExample> data,
                                           const ScramblePlan* plan) {
    std::vector<LabeledExample> out(data.begin(), data.end());
    if (!plan) return out;
    for (auto& ex : out) ex.image = scramble(ex.image, *plan);
    return out;
}

// ---------------------------------------------------------------------------

struct KeygenArgs {
    std::string scheme, out;
    std::size_t block_size = 4;
};

int cmd_keygen(const KeygenArgs& a) {
    const SchemeId scheme = scheme_arg(a.scheme);
    if (a.block_size == 0) throw UsageError("--block-size must be positive");
    const ScrambleKey key = generate_key(scheme, a.block_size);
    write_keyfile(key, a.out);
    std::cout << "wrote " << a.out << " scheme=" << scheme_name(key.scheme)
              << " block_size=" << key.block_size << " fingerprint=" << key_fingerprint(key)
              << '\n';
    return 0;
}

struct ImageArgs {
    std::string key, in, out;
};

int cmd_image(const ImageArgs& a, bool forward) {
    const ScrambleKey key = read_keyfile(a.key);
    const Image8 img = png_read(a.in);
    const Image8 out = forward ? scramble(img, key) : unscramble(img, key);
    png_write(out, a.out);
    std::cout << (forward ? "scrambled " : "unscrambled ") << a.in << " -> " << a.out << " ("
              << img.width() << "x" << img.height() << ", key " << key_fingerprint(key).substr(0, 16)
              << ")\n";
    return 0;
}

struct KeyspaceArgs {
    std::string scheme;
    std::size_t block_size = 4;
    std::size_t blocks = 64;
    std::vector<std::string> components{"rotation", "np", "color", "shuffle"};
};

int cmd_keyspace(const KeyspaceArgs& a) {
    const SchemeId scheme = scheme_arg(a.scheme);
    if (a.block_size == 0 || a.blocks == 0)
        throw UsageError("--block-size and --blocks must be positive");
    EtcComponents etc{false, false, false, false};
    for (const auto& c : a.components) {
        if (c == "rotation") etc.rotation_flip = true;
        else if (c == "np") etc.negative_positive = true;
        else if (c == "color") etc.color_shuffle = true;
        else if (c == "shuffle") etc.block_shuffle = true;
        else throw UsageError("unknown EtC component '" + c + "'");
    }
    const KeySpace ks = key_space(scheme, a.block_size, a.blocks, etc);
    char log2[64];
    std::snprintf(log2, sizeof log2, "%.1f", ks.log2_bits);
    std::cout << "scheme=" << scheme_name(scheme) << " block_size=" << a.block_size
              << " blocks=" << a.blocks << '\n'
              << "exact=" << ks.exact << '\n'
              << "log2=" << log2 << '\n';
    return 0;
}

struct DatasetArgs {
    std::string key, in, out, variant = "cifar10";
    bool augment = false;
    std::uint64_t augment_seed = 0;
};

int cmd_scramble_dataset(const DatasetArgs& a) {
    const ScrambleKey key = read_keyfile(a.key);
    const DatasetManifest m =
        scramble_dataset(a.in, a.out, key, parse_variant(a.variant), a.augment, a.augment_seed);
    std::cout << format_manifest(m);
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    DataArgs train, test;
    std::string key;
    std::string adapt = "ELE";
    std::size_t block_size = 4;
    bool raw_input = false;
    std::size_t epochs = 30;
    double lr = 0.0;
    std::string schedule;
    std::size_t batch_size = 128;
    double momentum = 0.9;
    double lambda_u = kDefaultLambdaU;
    double lambda_s = kDefaultLambdaS;
    std::uint64_t seed = 1;
    bool augment = false;
    std::string report = "train_report.txt";
    std::string checkpoint = "model.ckpt";
};

int cmd_train(TrainArgs& a, const std::vector<std::size_t>& classes) {
    const CifarVariant variant = parse_variant(a.train.variant);
    if (a.train.files.empty()) throw UsageError("--train needs at least one file");

    std::optional<ScrambleKey> key;
    std::optional<ScramblePlan> plan;
    if (!a.key.empty()) {
        key = read_keyfile(a.key);
        plan = make_plan(*key, kCifarSide, kCifarSide);
        a.block_size = key->block_size;
    }

    std::vector<DatasetManifest> manifests;
    const auto train_data = load(a.train, variant, classes, &manifests);
    const auto test_plain = load(a.test, variant, classes, &manifests);
    if (key && !manifests.empty())
        throw UsageError("the dataset is already scrambled (manifest found); drop --key");
    for (const auto& m : manifests)
        std::cerr << "dataset: scheme=" << scheme_name(m.scheme) << " block_size=" << m.block_size
                  << " key=" << m.key_fingerprint.substr(0, 16) << '\n';
    if (train_data.empty()) throw FormatError("no training examples after class selection");

    ModelConfig mc;
    mc.adapt = parse_adapt(a.adapt);
    mc.block_size = a.block_size;
    mc.nibble_input = !a.raw_input;
    mc.num_classes = classes.empty() ? cifar_classes(variant) : classes.size();
    Model model = Model::initialize(mc, a.seed);

    TrainConfig tc;
    tc.batch_size = a.batch_size;
    tc.momentum = a.momentum;
    tc.lambda_u = a.lambda_u;
    tc.lambda_s = a.lambda_s;
    tc.seed = a.seed;
    tc.augment = a.augment;
    if (!a.schedule.empty()) tc.schedule = parse_schedule(a.schedule);
    else tc.schedule = scaled_schedule(a.epochs, a.lr > 0.0 ? a.lr : kDefaultBaseRate);

    const auto test = scrambled_copy(test_plain, plan ? &*plan : nullptr);
    std::ofstream report(a.report, std::ios::trunc);
    if (!report) throw IoError("cannot open " + a.report + " for writing");
    report << "# adapt=" << a.adapt << " block_size=" << mc.block_size
           << " classes=" << mc.num_classes << " train=" << train_data.size()
           << " test=" << test.size() << " batch=" << tc.batch_size
           << " schedule=" << format_schedule(tc.schedule) << " momentum=" << tc.momentum
           << " lambda_u=" << tc.lambda_u << " lambda_s=" << tc.lambda_s << " seed=" << tc.seed
           << " augment=" << (tc.augment ? 1 : 0);
    if (key) report << " key=" << key_fingerprint(*key);
    report << '\n';

    TrainSource src{train_data, plan ? &*plan : nullptr};
    const TrainReport rep = train(model, src, test, tc, [&](const EpochRecord& r) {
        const std::string line = format_epoch_record(r);
        report << line << '\n' << std::flush;
        std::cerr << line << '\n';
    });
    report << "# u_penalty initial=" << rep.initial_u_penalty << " final=" << rep.final_u_penalty
           << " epochs=" << rep.epochs.size() << '\n';

    std::map<std::string, std::string> extra{
        {"train.schedule", format_schedule(tc.schedule)},
        {"train.seed", std::to_string(tc.seed)},
        {"train.epochs", std::to_string(rep.epochs.size())},
    };
    if (key) extra["train.key_fingerprint"] = key_fingerprint(*key);
    save_checkpoint(a.checkpoint, model, extra);
    std::cout << "epochs=" << rep.epochs.size();
    if (!rep.epochs.empty()) std::cout << " test_acc=" << rep.epochs.back().test_accuracy;
    std::cout << " report=" << a.report << " checkpoint=" << a.checkpoint << '\n';
    return 0;
}

struct EvalArgs {
    DataArgs test;
    std::string checkpoint, key, predictions;
};

int cmd_evaluate(const EvalArgs& a, const std::vector<std::size_t>& classes) {
    const CifarVariant variant = parse_variant(a.test.variant);
    if (a.test.files.empty()) throw UsageError("--test needs at least one file");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    if (!classes.empty() && classes.size() != ck.model.config().num_classes)
        throw UsageError("--classes lists " + std::to_string(classes.size()) +
                         " classes but the checkpoint has " +
                         std::to_string(ck.model.config().num_classes));

    std::optional<ScramblePlan> plan;
    if (!a.key.empty()) {
        const ScrambleKey key = read_keyfile(a.key);
        const auto it = ck.extra.find("train.key_fingerprint");
        if (it != ck.extra.end() && it->second != key_fingerprint(key))
            std::cerr << "warning: key differs from the one used in training\n";
        plan = make_plan(key, kCifarSide, kCifarSide);
    }
    const auto data = scrambled_copy(load(a.test, variant, classes, nullptr), plan ? &*plan : nullptr);
    const EvalResult r = evaluate(ck.model, data);
    std::cout << "accuracy=" << r.accuracy << " mean_loss=" << r.mean_loss
              << " count=" << data.size() << '\n';
    if (!a.predictions.empty()) {
        std::ofstream out(a.predictions, std::ios::trunc);
        if (!out) throw IoError("cannot open " + a.predictions + " for writing");
        out.precision(6);
        for (std::size_t i = 0; i < data.size(); ++i) {
            out << i << ' ' << data[i].label << ' ' << r.predictions[i].label;
            for (double p : r.predictions[i].posterior) out << ' ' << p;
            out << '\n';
        }
    }
    return 0;
}

int cmd_gradcheck(const GradCheckOptions& opt) {
    bool ok = true;
    for (const auto& r : run_gradcheck(opt)) {
        std::printf("%-22s draws=%zu failures=%zu worst=%.3e tol=%.0e %s\n", r.name.c_str(),
                    r.draws, r.failures, r.worst_error, r.tolerance, r.passed() ? "ok" : "FAIL");
        ok = ok && r.passed();
    }
    return ok ? 0 : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Block-wise image scrambling (LE, EtC, ELE) and adaptation-network training"};
    app.set_config("--config", "", "TOML/INI file of flag defaults; command-line flags win");
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: all cores)")
        ->check(CLI::NonNegativeNumber);
    std::vector<std::size_t> classes;

    KeygenArgs kg;
    auto* keygen = app.add_subcommand("keygen", "Write a fresh random key file");
    keygen->add_option("--scheme", kg.scheme, "LE, ETC or ELE")->required();
    keygen->add_option("--block-size", kg.block_size, "Block size B");
    keygen->add_option("--out", kg.out, "Key file to write")->required();

    ImageArgs sc, usc;
    auto* scramble_cmd = app.add_subcommand("scramble", "Scramble a PNG");
    auto* unscramble_cmd = app.add_subcommand("unscramble", "Invert scramble on a PNG");
    for (auto [cmd, args] : {std::pair{scramble_cmd, &sc}, std::pair{unscramble_cmd, &usc}}) {
        cmd->add_option("--key", args->key, "Key file")->required();
        cmd->add_option("--in", args->in, "Input PNG (8-bit RGB)")->required();
        cmd->add_option("--out", args->out, "Output PNG")->required();
    }

    KeyspaceArgs ks;
    auto* keyspace = app.add_subcommand("keyspace", "Print a scheme's exact key-space size");
    keyspace->add_option("--scheme", ks.scheme, "LE, ETC or ELE")->required();
    keyspace->add_option("--block-size", ks.block_size, "Block size B");
    keyspace->add_option("--blocks", ks.blocks, "Number of blocks N");
    keyspace->add_option("--etc-components", ks.components,
                         "EtC factors to count: rotation, np, color, shuffle")
        ->delimiter(',');

    DatasetArgs ds;
    auto* dataset = app.add_subcommand("scramble-dataset", "Scramble every image of a CIFAR file");
    dataset->add_option("--key", ds.key, "Key file")->required();
    dataset->add_option("--in", ds.in, "Input CIFAR binary")->required();
    dataset->add_option("--out", ds.out, "Output CIFAR binary (manifest written beside it)")
        ->required();
    dataset->add_option("--variant", ds.variant, "cifar10 or cifar100");
    dataset->add_flag("--augment", ds.augment, "Augment each image before scrambling");
    dataset->add_option("--augment-seed", ds.augment_seed, "Seed for augmentation draws");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a classifier (optionally with adaptation)");
    add_data_flags(train_cmd, tr.train, "--train", "--train-per-class", "Training");
    add_data_flags(train_cmd, tr.test, "--test", "--test-per-class", "Test");
    train_cmd->add_option("--variant", tr.train.variant, "cifar10 or cifar100");
    train_cmd->add_option("--classes", classes, "Class ids to keep, relabelled 0..K-1")
        ->delimiter(',');
    train_cmd->add_option("--key", tr.key, "Scramble plain data with this key every epoch");
    train_cmd->add_option("--adapt", tr.adapt, "none, LE or ELE");
    train_cmd->add_option("--block-size", tr.block_size, "Block size (taken from --key if given)");
    train_cmd->add_flag("--raw-input", tr.raw_input, "Feed 8-bit channels instead of nibbles");
    train_cmd->add_option("--epochs", tr.epochs, "Epochs for the scaled step schedule");
    train_cmd->add_option("--lr", tr.lr, "Base learning rate of the scaled schedule");
    train_cmd->add_option("--schedule", tr.schedule, "Explicit schedule, e.g. 0-150:0.1,150-300:0.01");
    train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size");
    train_cmd->add_option("--momentum", tr.momentum, "Nesterov momentum");
    train_cmd->add_option("--lambda-u", tr.lambda_u, "Weight of the U sparsity penalty");
    train_cmd->add_option("--lambda-s", tr.lambda_s, "Weight of the smoothness penalty");
    train_cmd->add_option("--seed", tr.seed, "Seed for initialisation, shuffling, augmentation");
    train_cmd->add_flag("--augment", tr.augment, "Reflect-pad crop and flip before scrambling");
    train_cmd->add_option("--report", tr.report, "Per-epoch report file");
    train_cmd->add_option("--checkpoint", tr.checkpoint, "Checkpoint to write");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy of a checkpoint on a test set");
    add_data_flags(eval_cmd, ev.test, "--test", "--test-per-class", "Test");
    eval_cmd->add_option("--variant", ev.test.variant, "cifar10 or cifar100");
    eval_cmd->add_option("--classes", classes, "Class ids to keep, relabelled 0..K-1")
        ->delimiter(',');
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint to load")->required();
    eval_cmd->add_option("--key", ev.key, "Scramble the plain test images with this key");
    eval_cmd->add_option("--predictions", ev.predictions,
                         "Write 'index label predicted posterior...' lines here");

    GradCheckOptions gc;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    grad_cmd->add_option("--draws", gc.draws, "Random draws per check");
    grad_cmd->add_option("--seed", gc.seed, "Seed for the draws");
    grad_cmd->add_option("--delta", gc.delta, "Central-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*keygen) return cmd_keygen(kg);
        if (*scramble_cmd) return cmd_image(sc, true);
        if (*unscramble_cmd) return cmd_image(usc, false);
        if (*keyspace) return cmd_keyspace(ks);
        if (*dataset) return cmd_scramble_dataset(ds);
        if (*train_cmd) return cmd_train(tr, classes);
        if (*eval_cmd) return cmd_evaluate(ev, classes);
        if (*grad_cmd) return cmd_gradcheck(gc);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
