// vocaldyn: command-line front end for the curation and training workflow.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>

#include "vocaldyn/dsp/feature_file.hpp"
#include "vocaldyn/eval/metrics.hpp"
#include "vocaldyn/io.hpp"
#include "vocaldyn/label/labels.hpp"
#include "vocaldyn/model/train.hpp"
#include "vocaldyn/pipeline/server.hpp"
#include "vocaldyn/score/musicxml.hpp"
#include "vocaldyn/score/score_json.hpp"
#include "vocaldyn/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace vocaldyn;
using pipeline::Json;

namespace {

pipeline::ReviewServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void emit(const Json& j, const std::string& out) {
    const auto text = j.dump(2) + "\n";
    if (out.empty() || out == "-") std::cout << text;
    else io::write_file_atomic(out, text);
}

score::ScoreDocument read_score(const std::string& path, const std::string& roles) {
    if (fs::path(path).extension() == ".json") return score::score_from_json(Json::parse(io::read_text_file(path)));
    score::MusicXmlOptions opt;
    if (!roles.empty()) opt.part_roles = score::parse_part_role_overrides(roles);
    return score::read_musicxml(path, opt);
}

score::PrefixPolicy parse_prefix(const std::string& s) {
    if (s == "fail") return score::PrefixPolicy::fail;
    if (s == "drop") return score::PrefixPolicy::drop;
    if (s == "first") return score::PrefixPolicy::use_first_marking;
    throw InvalidArgument("prefix policy must be fail, drop or first");
}

std::size_t default_sequence_length(const pipeline::HopConfig& c) {
    return c.name == "bark_x8" || c.name == "mel_x3" ? 4096 : 10000;
}

// Sequences of the labeled records selected by ids (all labeled when empty).
std::vector<model::Sequence> load_sequences(const pipeline::Manifest& m, const pipeline::HopConfig& c,
                                            const std::vector<std::string>& ids,
                                            const std::vector<std::string>& exclude) {
    std::vector<model::Sequence> out;
    for (const auto& r : m.records) {
        if (r.status != pipeline::Status::labeled) continue;
        if (!ids.empty() && std::find(ids.begin(), ids.end(), r.id) == ids.end()) continue;
        if (std::find(exclude.begin(), exclude.end(), r.id) != exclude.end()) continue;
        const auto dir = m.artifact_dir(r.id);
        const auto f = dsp::read_features(dir / pipeline::artifact::features(c));
        const auto l = label::read_labels(dir / pipeline::artifact::labels(c));
        label::check_hop(l.hop_seconds, f.hop_seconds);
        if (l.size() != f.frames) throw ShapeError("labels and features of '" + r.id + "' differ in length");
        out.push_back({f.values, l.classes, f.frames, r.id});
    }
    if (out.empty()) throw InvalidArgument("no labeled records selected");
    return out;
}

int run_stage_command(const std::string& manifest_path, pipeline::Stage stage, const std::vector<std::string>& ids,
                      const pipeline::StageOptions& opt, unsigned jobs) {
    auto m = pipeline::Manifest::load(manifest_path);
    int failed = 0;
    if (ids.empty()) {
        for (const auto& [id, why] : pipeline::run_stage_all(m, stage, opt, jobs)) {
            std::cerr << id << ": " << why << "\n";
            ++failed;
        }
    } else {
        for (const auto& id : ids) {
            try {
                auto& rec = m.find(id);
                rec = pipeline::run_stage(m, rec, stage, opt);
                m.save();
            } catch (const std::exception& e) {
                std::cerr << id << ": " << e.what() << "\n";
                ++failed;
            }
        }
    }
    for (const auto& r : m.records) {
        std::cout << r.id << "\t" << pipeline::status_name(r.status);
        if (r.alignment_score) std::printf("\t%.3f", *r.alignment_score);
        std::cout << "\n";
    }
    return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Singing-voice dynamics: score parsing, alignment, labeling, training and review"};
    app.require_subcommand(1);
    std::string isa;
    app.add_option("--isa", isa, "Kernel variant: scalar or avx2 (default: best available)");

    // parse
    auto* parse = app.add_subcommand("parse", "Parse a MusicXML score and print it with note-level dynamics");
    std::string parse_in, parse_out, parse_roles, parse_prefix_s = "drop";
    parse->add_option("score", parse_in, "MusicXML (.musicxml/.xml) or score JSON")->required();
    parse->add_option("-o,--out", parse_out, "Output JSON file (default stdout)");
    parse->add_option("--part-roles", parse_roles, "Overrides such as P1=vocal,P2=piano");
    parse->add_option("--prefix", parse_prefix_s, "Notes before the first marking: fail, drop or first");

    // filter
    auto* filter = app.add_subcommand("filter", "Apply the corpus filter and count markings per category");
    std::vector<std::string> filter_in;
    std::string filter_out;
    filter->add_option("scores", filter_in, "Score files")->required();
    filter->add_option("-o,--out", filter_out, "Output JSON file (default stdout)");

    // pipeline stages
    std::string manifest;
    std::vector<std::string> stage_ids;
    unsigned jobs = 1;
    bool to_stem = false;
    double grid = align::kDefaultGridSeconds;
    std::string label_prefix = "drop";
    auto add_stage = [&](const char* name, const char* help) {
        auto* c = app.add_subcommand(name, help);
        c->add_option("-m,--manifest", manifest, "Manifest JSON")->required();
        c->add_option("--id", stage_ids, "Only these records (default: every record waiting for this stage)");
        c->add_option("-j,--jobs", jobs, "Records processed in parallel");
        return c;
    };
    auto* features = add_stage("features", "Compute log-Mel and Bark features from the vocal stems");
    auto* align_cmd = add_stage("align", "Align scores to audio and score the alignment against f0");
    align_cmd->add_flag("--to-stem", to_stem, "Align against the vocal stem instead of the mix");
    align_cmd->add_option("--grid", grid, "Chroma frame period in seconds");
    auto* label_cmd = add_stage("label", "Write frame labels for accepted records");
    label_cmd->add_option("--prefix", label_prefix, "Notes before the first marking: fail, drop or first");

    // train
    auto* train = app.add_subcommand("train", "Train the frame classifier on labeled records");
    std::string train_cfg = "bark_x8", train_out, train_log;
    std::vector<std::string> train_ids, train_exclude;
    std::size_t seq_len = 0, epochs = 100, batch = 8;
    std::uint64_t seed = 0;
    double lr = 0.002;
    bool class_weights = false;
    train->add_option("-m,--manifest", manifest, "Manifest JSON")->required();
    train->add_option("-c,--config", train_cfg, "bark_x8, mel_x3, mel_x5 or bark_x15");
    train->add_option("-o,--out", train_out, "Checkpoint (.dynm)")->required();
    train->add_option("--log", train_log, "JSON-lines training log");
    train->add_option("--id", train_ids, "Train only on these records");
    train->add_option("--exclude", train_exclude, "Leave these records out");
    train->add_option("--seq-len", seq_len, "Window length in frames (default 4096 or 10000 by config)");
    train->add_option("--epochs", epochs, "Epochs");
    train->add_option("--batch-size", batch, "Windows per update");
    train->add_option("--lr", lr, "Adam learning rate");
    train->add_option("--seed", seed, "Initialization and shuffling seed");
    train->add_flag("--class-weights", class_weights, "Inverse-frequency class weighting");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints and print the accuracy table");
    std::vector<std::string> eval_models, eval_ids;
    std::string eval_json;
    eval_cmd->add_option("-m,--manifest", manifest, "Manifest JSON")->required();
    eval_cmd->add_option("--model", eval_models, "Checkpoints; each is evaluated on its own config")->required();
    eval_cmd->add_option("-c,--config", train_cfg, "Feature config the checkpoints were trained on");
    eval_cmd->add_option("--id", eval_ids, "Evaluate on these records (default: all labeled)");
    eval_cmd->add_option("--json", eval_json, "Also write the report as JSON");

    // stats
    auto* stats = app.add_subcommand("stats", "Seconds of labeled audio per dynamics class");
    std::vector<std::string> stats_files;
    std::string stats_out;
    stats->add_option("labels", stats_files, "DYNL files")->required();
    stats->add_option("-o,--out", stats_out, "Output JSON file (default stdout)");

    // export
    auto* export_cmd = app.add_subcommand("export", "Copy labeled features and labels into a dataset directory");
    std::string export_dir;
    export_cmd->add_option("-m,--manifest", manifest, "Manifest JSON")->required();
    export_cmd->add_option("-o,--out", export_dir, "Output directory")->required();

    // review
    auto* review = app.add_subcommand("review", "Manual filtering");
    review->require_subcommand(1);
    auto* serve = review->add_subcommand("serve", "Serve the review API and UI");
    std::string bind = "127.0.0.1:8080", static_dir;
    serve->add_option("--bind", bind, "HOST:PORT");
    serve->add_option("--manifest", manifest, "Manifest JSON")->required();
    serve->add_option("--static", static_dir, "Built review UI to serve at /");
    auto* decide = review->add_subcommand("decide", "Record an accept or reject decision");
    std::string decide_id, decide_what, decide_note, decide_by = "reviewer";
    decide->add_option("--manifest", manifest, "Manifest JSON")->required();
    decide->add_option("--id", decide_id, "Record id")->required();
    decide->add_option("--decision", decide_what, "accept or reject")->required()->check(CLI::IsMember({"accept", "reject"}));
    decide->add_option("--note", decide_note, "Free-text note");
    decide->add_option("--by", decide_by, "Reviewer name");

    CLI11_PARSE(app, argc, argv);

    try {
        if (isa == "scalar") simd::set_active_isa(simd::Isa::scalar);
        else if (isa == "avx2") simd::set_active_isa(simd::Isa::avx2);
        else if (!isa.empty()) throw InvalidArgument("--isa must be scalar or avx2");

        pipeline::StageOptions stage_opt;
        stage_opt.align_to_stem = to_stem;
        stage_opt.align.grid_seconds = grid;
        stage_opt.prefix = parse_prefix(label_prefix);

        if (*parse) {
            const auto s = read_score(parse_in, parse_roles);
            score::PropagationOptions po;
            po.prefix = parse_prefix(parse_prefix_s);
            Json j = score::to_json(s);
            j["note_dynamics"] = score::to_json(score::propagate_note_dynamics(s, po));
            emit(j, parse_out);
        } else if (*filter) {
            std::vector<score::ScoreDocument> scores;
            Json files = Json::array();
            for (const auto& f : filter_in) {
                try {
                    scores.push_back(read_score(f, ""));
                    files.push_back({{"path", f},
                                     {"passes", score::score_passes_filter(scores.back())},
                                     {"markings", scores.back().markings.size()}});
                } catch (const std::exception& e) {
                    files.push_back({{"path", f}, {"passes", false}, {"error", e.what()}});
                }
            }
            std::vector<score::ScoreDocument> kept;
            for (const auto& s : scores)
                if (score::score_passes_filter(s)) kept.push_back(s);
            emit({{"files", files}, {"passing", kept.size()}, {"marking_counts", score::to_json(score::corpus_marking_statistics(kept))}},
                 filter_out);
        } else if (*features) {
            return run_stage_command(manifest, pipeline::Stage::features, stage_ids, stage_opt, jobs);
        } else if (*align_cmd) {
            return run_stage_command(manifest, pipeline::Stage::align, stage_ids, stage_opt, jobs);
        } else if (*label_cmd) {
            return run_stage_command(manifest, pipeline::Stage::label, stage_ids, stage_opt, jobs);
        } else if (*train) {
            const auto m = pipeline::Manifest::load(manifest);
            const auto& cfg = pipeline::hop_config(train_cfg);
            const auto data = load_sequences(m, cfg, train_ids, train_exclude);
            model::ModelConfig mc;
            mc.input_bins = data.front().features.size() / std::max<std::size_t>(1, data.front().frames);
            mc.sequence_length = seq_len ? seq_len : default_sequence_length(cfg);
            mc.seed = seed;
            auto params = model::init_model<float>(mc);
            model::TrainConfig tc;
            tc.learning_rate = lr;
            tc.epochs = epochs;
            tc.batch_size = batch;
            tc.seed = seed;
            tc.class_weighting = class_weights;
            const auto log = train_log.empty() ? model::EpochCallback{} : model::jsonl_epoch_logger(train_log);
            model::train(params, data, tc, [&](const model::EpochStats& s) {
                if (log) log(s);
                std::fprintf(stderr, "epoch %zu  loss %.4f  masked accuracy %.4f\n", s.epoch, s.loss, s.masked_accuracy);
            });
            model::save_checkpoint(train_out, params);
        } else if (*eval_cmd) {
            const auto m = pipeline::Manifest::load(manifest);
            const auto& cfg = pipeline::hop_config(train_cfg);
            const auto data = load_sequences(m, cfg, eval_ids, {});
            std::vector<eval::EvalRun> runs;
            for (const auto& path : eval_models) {
                const auto params = model::load_checkpoint(path);
                for (const auto& s : data)
                    runs.push_back({model::predict(params, s.features, s.frames), s.labels,
                                    {cfg.kind, params.config.sequence_length, pipeline::hop_seconds(cfg)}});
            }
            const auto report = eval::build_report(runs);
            std::cout << report.to_text();
            if (!eval_json.empty()) emit(report.to_json(), eval_json);
        } else if (*stats) {
            std::vector<label::FrameLabelSequence> files;
            for (const auto& f : stats_files) files.push_back(label::read_labels(f));
            const auto secs = eval::duration_statistics(files);
            double total = 0.0;
            for (double s : secs) total += s;
            emit({{"seconds_per_class", eval::durations_to_json(secs)}, {"total_hours", total / 3600.0}}, stats_out);
        } else if (*export_cmd) {
            emit(pipeline::export_dataset(pipeline::Manifest::load(manifest), export_dir), "");
        } else if (*serve) {
            const auto [host, port] = pipeline::parse_bind_address(bind);
            pipeline::ReviewServer server(pipeline::Manifest::load(manifest), {static_dir, 1000});
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::fprintf(stderr, "serving %s on http://%s:%d\n", manifest.c_str(), host.c_str(), bound);
            server.serve();
            g_server = nullptr;
        } else if (*decide) {
            auto m = pipeline::Manifest::load(manifest);
            emit(pipeline::record_decision(m, decide_id, decide_what, decide_note, decide_by).to_json(), "");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
