#include "ringkit/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ringkit/errors.hpp"

namespace ringkit {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw ConfigError("config: " + what); }

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            fail("unknown key '" + key + "' in " + where);
        }
    }
}

PlanStep plan_step_from_json(const json& j) {
    const auto op = j.at("op").get<std::string>();
    PlanStep step;
    if (op == "standardize") {
        step.op = PlanStep::Op::Standardize;
        reject_unknown_keys(j, {"op"}, "preprocess step");
    } else if (op == "filter") {
        step.op = PlanStep::Op::Filter;
        reject_unknown_keys(j, {"op", "low_hz", "high_hz", "order"}, "preprocess step");
        step.filter.low_hz = j.at("low_hz").get<double>();
        step.filter.high_hz = j.at("high_hz").get<double>();
        step.filter.order = j.value("order", 4);
    } else if (op == "diffnorm") {
        step.op = PlanStep::Op::DiffNorm;
        reject_unknown_keys(j, {"op"}, "preprocess step");
    } else if (op == "spectral") {
        step.op = PlanStep::Op::Spectral;
        reject_unknown_keys(j, {"op", "segment_s", "overlap"}, "preprocess step");
        step.segment_s = j.value("segment_s", 10.0);
        step.overlap = j.value("overlap", 0.5);
    } else {
        fail("unknown preprocess op '" + op + "'");
    }
    return step;
}

json plan_step_to_json(const PlanStep& step) {
    json j;
    switch (step.op) {
    case PlanStep::Op::Standardize: j["op"] = "standardize"; break;
    case PlanStep::Op::Filter:
        j["op"] = "filter";
        j["low_hz"] = step.filter.low_hz;
        j["high_hz"] = step.filter.high_hz;
        j["order"] = step.filter.order;
        break;
    case PlanStep::Op::DiffNorm: j["op"] = "diffnorm"; break;
    case PlanStep::Op::Spectral:
        j["op"] = "spectral";
        j["segment_s"] = step.segment_s;
        j["overlap"] = step.overlap;
        break;
    }
    return j;
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory traj;
    if (j.is_number()) {
        traj.push_back({0.0, j.get<double>()});
        return traj;
    }
    for (const json& knot : j) {
        traj.push_back({knot.at(0).get<double>(), knot.at(1).get<double>()});
    }
    return traj;
}

json trajectory_to_json(const Trajectory& traj) {
    if (traj.size() == 1) return json(traj.front().value);
    json arr = json::array();
    for (const TrajectoryKnot& k : traj) {
        arr.push_back(json::array({k.t_s, k.value}));
    }
    return arr;
}

SynthSpec synth_spec_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"session_id", "subject_id", "ring_type", "duration_s", "rate_hz",
                         "hr_bpm", "rr_bpm", "target_r", "dc_ir", "dc_red", "perfusion",
                         "notch_amp", "noise_snr_db", "baseline_wander", "amp_modulation",
                         "motion", "sbp_mmhg", "dbp_mmhg", "emit_bp", "seed"},
                        "synth spec");
    SynthSpec s;
    s.session_id = j.value("session_id", s.session_id);
    s.subject_id = j.value("subject_id", s.subject_id);
    if (j.contains("ring_type")) {
        const auto rt = ring_type_from_string(j.at("ring_type").get<std::string>());
        if (!rt) fail("unknown ring_type in synth spec");
        s.ring_type = *rt;
    }
    s.duration_s = j.value("duration_s", s.duration_s);
    s.rate_hz = j.value("rate_hz", s.rate_hz);
    if (j.contains("hr_bpm")) s.hr_bpm = trajectory_from_json(j.at("hr_bpm"));
    if (j.contains("rr_bpm")) s.rr_bpm = trajectory_from_json(j.at("rr_bpm"));
    s.target_r = j.value("target_r", s.target_r);
    s.dc_ir = j.value("dc_ir", s.dc_ir);
    s.dc_red = j.value("dc_red", s.dc_red);
    s.perfusion = j.value("perfusion", s.perfusion);
    s.notch_amp = j.value("notch_amp", s.notch_amp);
    if (j.contains("noise_snr_db") && !j.at("noise_snr_db").is_null()) {
        s.noise_snr_db = j.at("noise_snr_db").get<double>();
    }
    s.baseline_wander = j.value("baseline_wander", s.baseline_wander);
    s.amp_modulation = j.value("amp_modulation", s.amp_modulation);
    if (j.contains("motion")) {
        const json& m = j.at("motion");
        reject_unknown_keys(m, {"kind", "fundamental_hz", "relative_amp"}, "motion spec");
        const auto kind = m.at("kind").get<std::string>();
        if (kind == "none") {
            s.motion.kind = MotionKind::None;
        } else if (kind == "walk") {
            s.motion.kind = MotionKind::Walk;
        } else if (kind == "squat") {
            s.motion.kind = MotionKind::Squat;
            s.motion.fundamental_hz = 0.5;
        } else {
            fail("unknown motion kind '" + kind + "'");
        }
        s.motion.fundamental_hz = m.value("fundamental_hz", s.motion.fundamental_hz);
        s.motion.relative_amp = m.value("relative_amp", s.motion.relative_amp);
    }
    s.sbp_mmhg = j.value("sbp_mmhg", s.sbp_mmhg);
    s.dbp_mmhg = j.value("dbp_mmhg", s.dbp_mmhg);
    s.emit_bp = j.value("emit_bp", s.emit_bp);
    s.seed = j.value("seed", s.seed);
    return s;
}

json synth_spec_to_json(const SynthSpec& s) {
    json j;
    j["session_id"] = s.session_id;
    j["subject_id"] = s.subject_id;
    j["ring_type"] = std::string(to_string(s.ring_type));
    j["duration_s"] = s.duration_s;
    j["rate_hz"] = s.rate_hz;
    j["hr_bpm"] = trajectory_to_json(s.hr_bpm);
    j["rr_bpm"] = trajectory_to_json(s.rr_bpm);
    j["target_r"] = s.target_r;
    j["dc_ir"] = s.dc_ir;
    j["dc_red"] = s.dc_red;
    j["perfusion"] = s.perfusion;
    j["notch_amp"] = s.notch_amp;
    j["noise_snr_db"] = std::isfinite(s.noise_snr_db) ? json(s.noise_snr_db) : json(nullptr);
    j["baseline_wander"] = s.baseline_wander;
    j["amp_modulation"] = s.amp_modulation;
    json m;
    m["kind"] = s.motion.kind == MotionKind::None
                    ? "none"
                    : (s.motion.kind == MotionKind::Walk ? "walk" : "squat");
    m["fundamental_hz"] = s.motion.fundamental_hz;
    m["relative_amp"] = s.motion.relative_amp;
    j["motion"] = std::move(m);
    j["sbp_mmhg"] = s.sbp_mmhg;
    j["dbp_mmhg"] = s.dbp_mmhg;
    j["emit_bp"] = s.emit_bp;
    j["seed"] = s.seed;
    return j;
}

SpO2Calibration calibration_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) fail("calibration must be [a, b]");
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

} // namespace

std::string_view to_string(Method m) {
    switch (m) {
    case Method::Peak: return "peak";
    case Method::Fft: return "fft";
    case Method::Ratio: return "ratio";
    case Method::Ridge: return "ridge";
    }
    return "?";
}

std::optional<Method> method_from_string(std::string_view s) {
    if (s == "peak") return Method::Peak;
    if (s == "fft") return Method::Fft;
    if (s == "ratio") return Method::Ratio;
    if (s == "ridge") return Method::Ridge;
    return std::nullopt;
}

PreprocessPlan default_plan(VitalKind task, Method method) {
    PreprocessPlan plan;
    if (method == Method::Ratio) {
        return plan; // the ratio method consumes raw channels
    }
    PlanStep standardize_step;
    standardize_step.op = PlanStep::Op::Standardize;
    plan.steps.push_back(standardize_step);

    PlanStep filter_step;
    filter_step.op = PlanStep::Op::Filter;
    filter_step.filter = task == VitalKind::RR ? rr_band().filter : hr_band().filter;
    plan.steps.push_back(filter_step);

    if (method == Method::Fft || method == Method::Ridge) {
        PlanStep spectral_step;
        spectral_step.op = PlanStep::Op::Spectral;
        plan.steps.push_back(spectral_step);
    }
    return plan;
}

void ExperimentConfig::validate() const {
    if (schema_version != 1) {
        fail("unsupported schema_version " + std::to_string(schema_version));
    }
    if (dataset_root.empty() == synth_specs.empty()) {
        fail("dataset must name exactly one of a root directory or a synth spec list");
    }
    if (channels.empty()) {
        fail("channels must be nonempty");
    }
    for (Channel c : channels) {
        if (is_reference(c)) {
            fail("channel '" + std::string(to_string(c)) +
                 "' is reference-only and cannot drive estimation");
        }
    }

    const bool rate_task = task == VitalKind::HR || task == VitalKind::RR;
    switch (method) {
    case Method::Ratio:
        if (task != VitalKind::SpO2) {
            fail("method 'ratio' is incompatible with task '" + std::string(to_string(task)) +
                 "' (ratio estimates spo2 only)");
        }
        break;
    case Method::Peak:
    case Method::Fft:
        if (!rate_task) {
            fail("method '" + std::string(to_string(method)) + "' is incompatible with task '" +
                 std::string(to_string(task)) + "' (peak and fft estimate hr or rr only)");
        }
        break;
    case Method::Ridge: break;
    }

    if (method == Method::Ratio) {
        bool have_ir = false;
        bool have_red = false;
        for (Channel c : channels) {
            have_ir = have_ir || c == Channel::PPG_IR;
            have_red = have_red || c == Channel::PPG_RED;
        }
        if (!have_ir || !have_red) {
            fail("method 'ratio' needs both ppg_ir and ppg_red channels");
        }
    }
    if (method == Method::Peak || method == Method::Fft) {
        bool have_ppg = false;
        for (Channel c : channels) have_ppg = have_ppg || is_ppg(c);
        if (!have_ppg) {
            fail("method '" + std::string(to_string(method)) + "' needs a PPG channel");
        }
    }

    preprocess.validate();
    if (method == Method::Fft && !preprocess.ends_with_spectral()) {
        fail("method 'fft' needs a preprocess plan ending with a spectral step");
    }
    if (method == Method::Peak && preprocess.ends_with_spectral()) {
        fail("method 'peak' needs time-domain samples, not a spectral plan");
    }

    if (!(window.duration_s > 0.0) || !(window.stride_s > 0.0) || !(window.rate_hz > 0.0)) {
        fail("window duration, stride and rate must be positive");
    }
    if (folds.k < 1) {
        fail("folds.k must be at least 1");
    }
    if (method == Method::Ridge) {
        if (folds.k < 3) {
            fail("method 'ridge' needs folds.k >= 3 (train, validation and test folds)");
        }
        if (training.lambda_grid.empty()) {
            fail("training.lambda_grid must be nonempty");
        }
        for (double l : training.lambda_grid) {
            if (l < 0.0) fail("training.lambda_grid entries must be nonnegative");
        }
    }
    if (calibration_reflective) calibration_reflective->validate();
    if (calibration_transmissive) calibration_transmissive->validate();
    for (const SynthSpec& s : synth_specs) {
        s.validate();
    }
    if (output_dir.empty()) {
        fail("output dir must be nonempty");
    }
}

ExperimentConfig config_from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(e.what());
    }
    reject_unknown_keys(j,
                        {"schema_version", "dataset", "task", "method", "channels", "ring_type",
                         "preprocess", "window", "folds", "training", "eval", "calibration",
                         "output_dir"},
                        "config");

    ExperimentConfig cfg;
    cfg.schema_version = j.value("schema_version", 1);

    if (!j.contains("dataset")) fail("missing dataset block");
    const json& ds = j.at("dataset");
    reject_unknown_keys(ds, {"root", "synth"}, "dataset");
    if (ds.contains("root")) {
        cfg.dataset_root = ds.at("root").get<std::string>();
    }
    if (ds.contains("synth")) {
        for (const json& s : ds.at("synth")) {
            cfg.synth_specs.push_back(synth_spec_from_json(s));
        }
    }

    if (j.contains("task")) {
        const auto task = vital_from_string(j.at("task").get<std::string>());
        if (!task) fail("unknown task '" + j.at("task").get<std::string>() + "'");
        cfg.task = *task;
    }
    if (j.contains("method")) {
        const auto method = method_from_string(j.at("method").get<std::string>());
        if (!method) fail("unknown method '" + j.at("method").get<std::string>() + "'");
        cfg.method = *method;
    }
    if (j.contains("channels")) {
        cfg.channels.clear();
        for (const json& c : j.at("channels")) {
            const auto ch = channel_from_string(c.get<std::string>());
            if (!ch) fail("unknown channel '" + c.get<std::string>() + "'");
            cfg.channels.push_back(*ch);
        }
    }
    if (j.contains("ring_type") && !j.at("ring_type").is_null()) {
        const auto s = j.at("ring_type").get<std::string>();
        if (s != "all") {
            const auto rt = ring_type_from_string(s);
            if (!rt) fail("unknown ring_type '" + s + "'");
            cfg.ring_filter = rt;
        }
    }

    if (j.contains("preprocess")) {
        const json& p = j.at("preprocess");
        reject_unknown_keys(p, {"steps"}, "preprocess");
        for (const json& step : p.at("steps")) {
            cfg.preprocess.steps.push_back(plan_step_from_json(step));
        }
    } else {
        cfg.preprocess = default_plan(cfg.task, cfg.method);
    }

    if (j.contains("window")) {
        const json& w = j.at("window");
        reject_unknown_keys(w, {"duration_s", "rate_hz", "stride_s", "min_rate_hz"}, "window");
        cfg.window.duration_s = w.value("duration_s", cfg.window.duration_s);
        cfg.window.rate_hz = w.value("rate_hz", cfg.window.rate_hz);
        cfg.window.stride_s = w.value("stride_s", cfg.window.duration_s);
        cfg.window.gate_hz = w.value("min_rate_hz", cfg.window.gate_hz);
    }
    if (j.contains("folds")) {
        const json& f = j.at("folds");
        reject_unknown_keys(f, {"k", "seed"}, "folds");
        cfg.folds.k = f.value("k", cfg.folds.k);
        cfg.folds.seed = f.value("seed", cfg.folds.seed);
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        reject_unknown_keys(t, {"lambda_grid"}, "training");
        if (t.contains("lambda_grid")) {
            cfg.training.lambda_grid = t.at("lambda_grid").get<std::vector<double>>();
        }
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown_keys(e, {"stratify_by", "include_out_of_band", "merge_mode"}, "eval");
        if (e.contains("stratify_by")) {
            const auto s = e.at("stratify_by").get<std::string>();
            if (s == "scenario") {
                cfg.eval.stratify_by = StratifyBy::Scenario;
            } else if (s == "activity") {
                cfg.eval.stratify_by = StratifyBy::Activity;
            } else {
                fail("unknown stratify_by '" + s + "'");
            }
        }
        cfg.eval.include_out_of_band = e.value("include_out_of_band", true);
        if (e.contains("merge_mode")) {
            const auto s = e.at("merge_mode").get<std::string>();
            if (s == "pooled") {
                cfg.eval.merge_mode = MergeMode::Pooled;
            } else if (s == "mean_of_folds") {
                cfg.eval.merge_mode = MergeMode::MeanOfFolds;
            } else {
                fail("unknown merge_mode '" + s + "'");
            }
        }
    }
    if (j.contains("calibration")) {
        const json& c = j.at("calibration");
        reject_unknown_keys(c, {"reflective", "transmissive"}, "calibration");
        if (c.contains("reflective")) {
            cfg.calibration_reflective = calibration_from_json(c.at("reflective"));
        }
        if (c.contains("transmissive")) {
            cfg.calibration_transmissive = calibration_from_json(c.at("transmissive"));
        }
    }
    if (j.contains("output_dir")) {
        cfg.output_dir = j.at("output_dir").get<std::string>();
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_string(text);
}

std::string config_to_json_string(const ExperimentConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    json ds;
    if (!cfg.dataset_root.empty()) {
        ds["root"] = cfg.dataset_root.string();
    } else {
        json specs = json::array();
        for (const SynthSpec& s : cfg.synth_specs) specs.push_back(synth_spec_to_json(s));
        ds["synth"] = std::move(specs);
    }
    j["dataset"] = std::move(ds);
    j["task"] = std::string(to_string(cfg.task));
    j["method"] = std::string(to_string(cfg.method));
    json chans = json::array();
    for (Channel c : cfg.channels) chans.push_back(std::string(to_string(c)));
    j["channels"] = std::move(chans);
    j["ring_type"] = cfg.ring_filter ? json(std::string(to_string(*cfg.ring_filter)))
                                     : json("all");
    json steps = json::array();
    for (const PlanStep& s : cfg.preprocess.steps) steps.push_back(plan_step_to_json(s));
    j["preprocess"] = {{"steps", std::move(steps)}};
    j["window"] = {{"duration_s", cfg.window.duration_s},
                   {"rate_hz", cfg.window.rate_hz},
                   {"stride_s", cfg.window.stride_s},
                   {"min_rate_hz", cfg.window.gate_hz}};
    j["folds"] = {{"k", cfg.folds.k}, {"seed", cfg.folds.seed}};
    j["training"] = {{"lambda_grid", cfg.training.lambda_grid}};
    j["eval"] = {{"stratify_by",
                  cfg.eval.stratify_by == StratifyBy::Scenario ? "scenario" : "activity"},
                 {"include_out_of_band", cfg.eval.include_out_of_band},
                 {"merge_mode",
                  cfg.eval.merge_mode == MergeMode::Pooled ? "pooled" : "mean_of_folds"}};
    if (cfg.calibration_reflective || cfg.calibration_transmissive) {
        json c;
        if (cfg.calibration_reflective) {
            c["reflective"] =
                json::array({cfg.calibration_reflective->a, cfg.calibration_reflective->b});
        }
        if (cfg.calibration_transmissive) {
            c["transmissive"] =
                json::array({cfg.calibration_transmissive->a, cfg.calibration_transmissive->b});
        }
        j["calibration"] = std::move(c);
    }
    j["output_dir"] = cfg.output_dir.string();
    return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string canonical = config_to_json_string(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (char c : canonical) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace ringkit
