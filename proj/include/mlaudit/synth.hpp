#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlaudit/callgraph.hpp"
#include "mlaudit/codec.hpp"
#include "mlaudit/dataset.hpp"
#include "mlaudit/detector.hpp"
#include "mlaudit/report.hpp"
#include "mlaudit/rng.hpp"
#include "mlaudit/trace.hpp"

namespace mlaudit {

// The default ML-indicator keyword list (mirrored in data/keywords.txt).
// The synthesizer needs it verbatim so obfuscated name generation can veto
// accidental hits.
inline const std::vector<std::string>& default_keywords() {
    static const std::vector<std::string> kw = {
        "tensor", "model",  "inference", "predict", "forward", "neural",
        "nn",     "cnn",    "lstm",      "tflite",  "onnx",    "mlkit",
        "classif", "score", "prob",      "embed"};
    return kw;
}

// ---------------------------------------------------------------------
// Synthetic app traces with a planted ML pipeline
// ---------------------------------------------------------------------

// The planted pipeline mirrors a camera-filter app: a native library hooks
// the camera feed, preprocesses each frame, crosses into a separate
// inference library whose non-exported register function is reached
// through a dynamic jump, and ships results back to managed code through
// an async callback that a Java handler persists.
struct SyntheticAppPlan {
    std::uint64_t seed = 1;
    int n_background_functions = 100;  // distinct noise functions
    int n_background_calls = -1;       // -1: one call per noise function
    int n_frames = 10;
    bool obfuscate_names = false;
    bool plant_second_input = false;   // undeclared extra feed into the model
};

struct TraceGroundTruth {
    std::vector<NodeId> pipeline_nodes;  // includes the second input if planted
    NodeId candidate;                    // the logging callback
    std::optional<NodeId> second_input;
    std::vector<std::uint64_t> callback_record_indices;
    std::vector<std::string> payloads;   // per frame
    std::string jump_library;
    std::uint64_t branch_offset = 0;
    std::vector<std::uint64_t> dest_offsets;  // ascending
    std::map<std::string, std::string> name_map;  // plain -> emitted
    std::uint64_t total_records = 0;
};

struct SynthTrace {
    TraceGroundTruth truth;
    std::vector<JumpRecord> jumps;
    std::vector<CallEdge> static_edges;
    RoleMap roles;
};

namespace synth_detail {

inline bool contains_keyword(const std::string& name) {
    std::string lower = detail::lowercase(name);
    for (const auto& kw : default_keywords())
        if (lower.find(kw) != std::string::npos) return true;
    return false;
}

class NamePool {
public:
    NamePool(Rng& rng, bool obfuscate) : rng_(rng), obfuscate_(obfuscate) {}

    std::string fresh(const std::string& plain, bool java) {
        if (!obfuscate_) {
            used_.insert(plain);
            return plain;
        }
        for (;;) {
            std::string name = java ? java_id() : short_id();
            if (contains_keyword(name) || used_.count(name)) continue;
            used_.insert(name);
            return name;
        }
    }

private:
    std::string short_id() {
        static const char alpha[] = "abcdefghijkmpqrstuvwxyz";
        const std::size_t len = 2 + rng_.next_index(4);
        std::string s;
        for (std::size_t i = 0; i < len; ++i)
            s.push_back(alpha[rng_.next_index(sizeof alpha - 1)]);
        return s;
    }

    std::string java_id() {
        const std::size_t segments = 2 + rng_.next_index(2);
        std::string s;
        for (std::size_t i = 0; i < segments; ++i) {
            if (i) s.push_back('.');
            s += short_id();
        }
        return s;
    }

    Rng& rng_;
    bool obfuscate_;
    std::set<std::string> used_;
};

struct Emitter {
    std::ostream& out;
    std::uint64_t ts = 1'000'000;
    std::uint64_t index = 0;
    Rng& rng;

    std::uint64_t emit(TraceRecord r) {
        ts += 50 + rng.next_index(1950);
        r.timestamp_ns = ts;
        out << to_json_line(r) << '\n';
        return index++;
    }
};

inline std::vector<std::uint8_t> random_bytes(Rng& rng, std::size_t n) {
    std::vector<std::uint8_t> b(n);
    for (auto& x : b) x = std::uint8_t(rng.next_index(256));
    return b;
}

}  // namespace synth_detail

// Emit the planted trace to `out` (one JSON record per line) and return
// everything a test oracle needs to check the toolkit against the plant.
// Byte-identical output for identical plans.
inline SynthTrace generate_trace(const SyntheticAppPlan& plan, std::ostream& out) {
    Rng rng(plan.seed);
    // Names draw from their own stream so toggling obfuscation changes
    // nothing about record scheduling, offsets, or values.
    Rng name_rng(plan.seed ^ 0x9e3779b97f4a7c15ull);
    synth_detail::NamePool names(name_rng, plan.obfuscate_names);
    synth_detail::Emitter emit{out, 1'000'000, 0, rng};

    const std::string lib_fx = "libfxcam.so";
    const std::string lib_rt = "libvisrt.so";

    struct Stage {
        const char* plain;
        std::string emitted;
        std::optional<std::string> lib;
        std::uint64_t off;
    };
    Stage camera{"camera_frame_hook", "", lib_fx, 0x1000};
    Stage pre{"frame_preprocess_rgb", "", lib_fx, 0x1400};
    Stage model{"nn_forward_main", "", lib_rt, 0x4000};
    Stage reg{"result_score_register", "", lib_rt, 0x4800};
    Stage reset{"register_reset", "", lib_rt, 0x4c00};
    Stage callback{"post_inference_message", "", lib_fx, 0x1800};
    Stage dispatcher{"com.app.msg.MessageDispatcher.dispatch", "", std::nullopt, 0};
    Stage sink{"com.app.log.EventLogWriter.write", "", std::nullopt, 0};
    Stage profile{"user_profile_feed", "", lib_fx, 0x1c00};

    SynthTrace result;
    for (Stage* s : {&camera, &pre, &model, &reg, &reset, &callback,
                     &dispatcher, &sink, &profile}) {
        s->emitted = names.fresh(s->plain, !s->lib.has_value());
        result.truth.name_map[s->plain] = s->emitted;
    }

    auto node_of = [](const Stage& s) { return NodeId{s.emitted, s.lib}; };
    auto frame_of = [&](const Stage& s) {
        return s.lib ? s.emitted + "@" + *s.lib : s.emitted;
    };

    result.truth.pipeline_nodes = {node_of(camera),  node_of(pre),
                                   node_of(model),   node_of(reg),
                                   node_of(callback), node_of(dispatcher),
                                   node_of(sink)};
    if (plan.plant_second_input) {
        result.truth.pipeline_nodes.push_back(node_of(profile));
        result.truth.second_input = node_of(profile);
    }
    result.truth.candidate = node_of(callback);
    result.truth.jump_library = lib_rt;
    result.truth.branch_offset = model.off + 0x40;

    // Noise pool: names, libs, shorties.
    struct Noise {
        std::string name;
        std::optional<std::string> lib;
        std::uint64_t off;
        std::string shorty;
    };
    static const char* kStems[] = {"str_copy",  "ui_layout",  "gc_region",
                                   "audio_mix", "net_poll",   "db_cursor",
                                   "anim_tick", "cache_evict", "img_blit",
                                   "fs_stat"};
    static const char* kShorties[] = {"V", "I", "Z", "VI", "IJ", "VL",
                                      "ZIL", "JIF", "VD", "LI"};
    std::vector<Noise> noise;
    noise.reserve(std::size_t(plan.n_background_functions));
    for (int i = 0; i < plan.n_background_functions; ++i) {
        Noise n;
        const bool java = rng.next_index(2) == 0;
        std::string plain;
        if (java) {
            plain = std::string("com.app.w") + std::to_string(i / 7) + ".Task" +
                    std::to_string(i) + ".run";
        } else {
            plain = std::string(kStems[rng.next_index(10)]) + "_" + std::to_string(i);
            n.lib = rng.next_index(2) ? "libutil.so" : "libgfx.so";
            n.off = 0x10000 + std::uint64_t(i) * 0x40;
        }
        n.name = names.fresh(plain, java);
        n.shorty = kShorties[rng.next_index(10)];
        noise.push_back(std::move(n));
    }

    auto emit_noise_call = [&]() {
        if (noise.empty()) return;
        const Noise& n = noise[rng.next_index(noise.size())];
        TraceRecord r;
        r.pid = 4242;
        r.tid = 20 + std::int32_t(rng.next_index(4));
        r.kind = n.lib && rng.next_index(6) == 0 ? RecordKind::JniTrampoline
                                                 : RecordKind::QuickCode;
        r.function_name = n.name;
        r.library = n.lib;
        if (n.lib) r.offset = n.off;
        const auto sig = parse_shorty(n.shorty);
        r.is_static = rng.next_index(2) == 0;
        std::vector<TypedValue> args;
        for (std::size_t i = 0; i < sig.arg_kinds.size(); ++i) {
            const TypeKind k = sig.arg_kinds[i];
            switch (k) {
                case TypeKind::Int:
                    args.push_back(TypedValue::of_int(k, std::int64_t(rng.next_index(1 << 20))));
                    break;
                case TypeKind::Long:
                    args.push_back(TypedValue::of_int(k, std::int64_t(rng.next_u64() >> 1)));
                    break;
                case TypeKind::Float:
                    args.push_back(TypedValue::of_float(float(rng.next_unit() * 100.0)));
                    break;
                case TypeKind::Double:
                    args.push_back(TypedValue::of_double(rng.next_unit() * 1000.0));
                    break;
                case TypeKind::Bool:
                    args.push_back(TypedValue::of_bool(rng.next_index(2)));
                    break;
                case TypeKind::Pointer: {
                    const bool final_arg = i + 1 == sig.arg_kinds.size();
                    args.push_back(TypedValue::of_blob(synth_detail::random_bytes(
                        rng, final_arg ? 8 + rng.next_index(56) : 4)));
                    break;
                }
                default:
                    args.push_back(TypedValue::of_int(TypeKind::Int, 0));
            }
        }
        r.shorty = n.shorty;
        r.raw_args = encode_args(args, r.is_static);
        if (sig.return_kind != TypeKind::Void) {
            if (sig.return_kind == TypeKind::Pointer)
                r.raw_return = synth_detail::random_bytes(rng, 4);
            else if (sig.return_kind == TypeKind::Long)
                r.raw_return = encode_args({TypedValue::of_int(TypeKind::Long, 1)}, true);
            else if (sig.return_kind == TypeKind::Int)
                r.raw_return = encode_args(
                    {TypedValue::of_int(TypeKind::Int, std::int64_t(rng.next_index(100)))}, true);
            else if (sig.return_kind == TypeKind::Bool)
                r.raw_return = encode_args({TypedValue::of_bool(rng.next_index(2))}, true);
            else if (sig.return_kind == TypeKind::Float)
                r.raw_return = encode_args({TypedValue::of_float(1.5f)}, true);
            else if (sig.return_kind == TypeKind::Double)
                r.raw_return = encode_args({TypedValue::of_double(2.5)}, true);
        }
        if (rng.next_index(10) < 3 && noise.size() > 1) {
            const Noise& caller = noise[rng.next_index(noise.size())];
            r.stack = {{(n.lib ? n.name + "@" + *n.lib : n.name),
                        (caller.lib ? caller.name + "@" + *caller.lib : caller.name)}};
        }
        emit.emit(std::move(r));
    };

    const std::uint64_t total_noise =
        plan.n_background_calls < 0 ? std::uint64_t(plan.n_background_functions)
                                    : std::uint64_t(plan.n_background_calls);
    const std::uint64_t frames = std::uint64_t(std::max(plan.n_frames, 0));
    const std::uint64_t noise_per_frame = frames ? total_noise / frames : 0;
    std::uint64_t noise_left = total_noise;

    std::uint64_t reg_jumps = 0, reset_jumps = 0;
    for (std::uint64_t f = 0; f < frames; ++f) {
        // camera
        TraceRecord r;
        r.pid = 4242;
        r.tid = 11;
        r.kind = RecordKind::QuickCode;
        r.function_name = camera.emitted;
        r.library = camera.lib;
        r.offset = camera.off;
        r.shorty = "VJ";
        r.raw_args = encode_args({TypedValue::of_int(TypeKind::Long, std::int64_t(f))}, true);
        r.stack = {{frame_of(camera)}};
        emit.emit(r);

        // preprocess
        r = {};
        r.pid = 4242;
        r.tid = 11;
        r.kind = RecordKind::QuickCode;
        r.function_name = pre.emitted;
        r.library = pre.lib;
        r.offset = pre.off;
        r.shorty = "LL";
        r.is_static = false;
        r.raw_args = encode_args(
            {TypedValue::of_blob(synth_detail::random_bytes(rng, 96))}, false);
        r.raw_return = synth_detail::random_bytes(rng, 4);
        r.stack = {{frame_of(pre), frame_of(camera)}};
        emit.emit(r);

        // second input feeding the model (observed on every frame when planted)
        if (plan.plant_second_input) {
            r = {};
            r.pid = 4242;
            r.tid = 11;
            r.kind = RecordKind::QuickCode;
            r.function_name = profile.emitted;
            r.library = profile.lib;
            r.offset = profile.off;
            r.shorty = "J";
            r.raw_return = encode_args({TypedValue::of_int(TypeKind::Long, 77)}, true);
            r.stack = {{frame_of(profile)}};
            emit.emit(r);
        }

        // model entry (jni crossing), called from preprocess
        r = {};
        r.pid = 4242;
        r.tid = 11;
        r.kind = RecordKind::JniTrampoline;
        r.function_name = model.emitted;
        r.library = model.lib;
        r.offset = model.off;
        r.shorty = "IL";
        r.raw_args = encode_args(
            {TypedValue::of_blob(synth_detail::random_bytes(rng, 128))}, true);
        r.raw_return = encode_args({TypedValue::of_int(TypeKind::Int, 0)}, true);
        r.stack = {{frame_of(model), frame_of(pre), frame_of(camera)}};
        emit.emit(r);

        if (plan.plant_second_input) {
            // the model also reads the profile feed
            r.stack = {{frame_of(model), frame_of(profile)}};
            r.raw_args = encode_args(
                {TypedValue::of_blob(synth_detail::random_bytes(rng, 32))}, true);
            emit.emit(r);
        }

        // dynamic jump model -> register every frame; a maintenance path to
        // register_reset shows up on some frames, making the branch
        // multi-destination
        ++reg_jumps;
        const bool reset_frame = f > 0 && f % 4 == 0;
        if (reset_frame) {
            ++reset_jumps;
            r = {};
            r.pid = 4242;
            r.tid = 12;
            r.kind = RecordKind::QuickCode;
            r.function_name = reset.emitted;
            r.library = reset.lib;
            r.offset = reset.off;
            r.shorty = "V";
            r.stack = {{frame_of(reset)}};
            emit.emit(r);
        }

        // register store (non-exported; no caller stack)
        r = {};
        r.pid = 4242;
        r.tid = 12;
        r.kind = RecordKind::QuickCode;
        r.function_name = reg.emitted;
        r.library = reg.lib;
        r.offset = reg.off;
        r.shorty = "VL";
        r.raw_args = encode_args(
            {TypedValue::of_blob(synth_detail::random_bytes(rng, 24))}, true);
        r.stack = {{frame_of(reg)}};
        emit.emit(r);

        // logging callback with the planted payload
        const double age = 5.0 + rng.next_unit() * 60.0;
        const double boy_prob = 0.05 + rng.next_unit() * 0.9;
        const double x0 = 0.05 + rng.next_unit() * 0.4;
        const double y0 = 0.05 + rng.next_unit() * 0.4;
        std::string payload = "{\"face_count\":1,\"bbox\":[";
        payload += format_fixed(x0, 3) + "," + format_fixed(y0, 3) + "," +
                   format_fixed(x0 + 0.3, 3) + "," + format_fixed(y0 + 0.35, 3);
        payload += "],\"age\":" + format_fixed(age, 1);
        payload += ",\"boy_prob\":" + format_fixed(boy_prob, 3) + "}";
        r = {};
        r.pid = 4242;
        r.tid = 12;
        r.kind = RecordKind::Callback;
        r.function_name = callback.emitted;
        r.library = callback.lib;
        r.offset = callback.off;
        r.payload = payload;
        r.stack = {{frame_of(callback), frame_of(reg)}};
        result.truth.payloads.push_back(payload);
        result.truth.callback_record_indices.push_back(emit.emit(r));

        // java dispatch + sink
        r = {};
        r.pid = 4242;
        r.tid = 13;
        r.kind = RecordKind::QuickCode;
        r.function_name = dispatcher.emitted;
        r.shorty = "VL";
        r.is_static = false;
        r.raw_args = encode_args({TypedValue::of_blob({0, 0, 0, 1})}, false);
        r.stack = {{frame_of(dispatcher), frame_of(callback)}};
        emit.emit(r);

        r = {};
        r.pid = 4242;
        r.tid = 13;
        r.kind = RecordKind::QuickCode;
        r.function_name = sink.emitted;
        r.shorty = "ZL";
        r.is_static = false;
        r.raw_args = encode_args({TypedValue::of_blob({0, 0, 0, 2})}, false);
        r.raw_return = encode_args({TypedValue::of_bool(true)}, true);
        r.stack = {{frame_of(sink), frame_of(dispatcher), frame_of(callback)}};
        emit.emit(r);

        const std::uint64_t quota =
            f + 1 == frames ? noise_left : std::min(noise_left, noise_per_frame);
        for (std::uint64_t i = 0; i < quota; ++i) emit_noise_call();
        noise_left -= quota;
    }
    while (noise_left-- > 0) emit_noise_call();

    result.truth.total_records = emit.index;

    if (reg_jumps > 0) {
        result.jumps.push_back(
            {lib_rt, result.truth.branch_offset, reg.off, reg_jumps});
        result.truth.dest_offsets.push_back(reg.off);
    }
    if (reset_jumps > 0) {
        result.jumps.push_back(
            {lib_rt, result.truth.branch_offset, reset.off, reset_jumps});
        result.truth.dest_offsets.push_back(reset.off);
    }
    std::sort(result.truth.dest_offsets.begin(), result.truth.dest_offsets.end());

    if (frames > 0) {
        result.static_edges.push_back(
            {node_of(dispatcher), node_of(sink), EdgeKind::Static, 0});
        result.roles.roles[node_of(camera)].insert(Role::InputSource);
        result.roles.roles[node_of(pre)].insert(Role::Preprocess);
        result.roles.roles[node_of(model)].insert(Role::ModelEntry);
        result.roles.roles[node_of(sink)].insert(Role::Sink);
        result.roles.non_exported.insert(node_of(reg));
        result.roles.non_exported.insert(node_of(callback));
        result.roles.non_exported.insert(node_of(reset));
    }
    return result;
}

inline nlohmann::ordered_json trace_truth_to_json(const TraceGroundTruth& t) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : t.pipeline_nodes) nodes.push_back(n.to_string());
    j["pipeline_nodes"] = std::move(nodes);
    j["candidate"] = t.candidate.to_string();
    if (t.second_input) j["second_input"] = t.second_input->to_string();
    j["callback_records"] = t.callback_record_indices;
    j["payloads"] = t.payloads;
    j["jump_library"] = t.jump_library;
    char buf[20];
    std::snprintf(buf, sizeof buf, "0x%llx",
                  static_cast<unsigned long long>(t.branch_offset));
    j["branch_offset"] = buf;
    nlohmann::ordered_json dests = nlohmann::ordered_json::array();
    for (auto d : t.dest_offsets) {
        std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(d));
        dests.push_back(buf);
    }
    j["dest_offsets"] = std::move(dests);
    j["name_map"] = t.name_map;
    j["total_records"] = t.total_records;
    return j;
}

inline nlohmann::ordered_json jumps_to_json(const std::vector<JumpRecord>& jumps) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    char buf[20];
    for (const auto& jr : jumps) {
        nlohmann::ordered_json j;
        j["lib"] = jr.library;
        std::snprintf(buf, sizeof buf, "0x%llx",
                      static_cast<unsigned long long>(jr.branch_offset));
        j["branch"] = buf;
        std::snprintf(buf, sizeof buf, "0x%llx",
                      static_cast<unsigned long long>(jr.dest_offset));
        j["dest"] = buf;
        j["count"] = jr.observations;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline nlohmann::ordered_json static_edges_to_json(const std::vector<CallEdge>& edges) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : edges) {
        nlohmann::ordered_json j;
        j["from"] = e.from.to_string();
        j["to"] = e.to.to_string();
        j["support"] = e.support;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline nlohmann::ordered_json role_map_to_json(const RoleMap& roles) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json by_role;
    for (const auto& [id, rs] : roles.roles)
        for (Role r : rs) by_role[role_tag(r)].push_back(id.to_string());
    j["roles"] = std::move(by_role);
    nlohmann::ordered_json ne = nlohmann::ordered_json::array();
    for (const auto& id : roles.non_exported) ne.push_back(id.to_string());
    j["non_exported"] = std::move(ne);
    return j;
}

inline SyntheticAppPlan trace_plan_from_json(const nlohmann::json& j) {
    SyntheticAppPlan p;
    p.seed = j.value("seed", std::uint64_t(1));
    p.n_background_functions = j.value("n_background_functions", 100);
    p.n_background_calls = j.value("n_background_calls", -1);
    p.n_frames = j.value("n_frames", 10);
    p.obfuscate_names = j.value("obfuscate_names", false);
    p.plant_second_input = j.value("plant_second_input", false);
    return p;
}

// ---------------------------------------------------------------------
// Synthetic score datasets with planted disparities
// ---------------------------------------------------------------------

struct DisparityPlan {
    std::uint64_t seed = 1;
    std::vector<std::string> ethnicities = {"Asian", "Black", "Indian", "White"};
    std::vector<std::string> concepts;
    int n_per_group = 100;
    double base_mean = 0.3;
    double base_sd = 0.1;
    double pos_rate = 0.5;  // fraction of samples annotated positive per concept
    double pos_gap = 0.3;   // score lift for positives

    struct Shift {
        std::string concept_name;
        std::string group;  // "<Ethnicity> <Sex>"
        double delta;
    };
    std::vector<Shift> shifts;

    // Force an empty annotation class for a (concept, group) cell, which
    // makes the corresponding AUC cell NaN.
    struct EmptyCell {
        std::string concept_name;
        std::string group;
        bool empty_pos;  // true: no positives; false: no negatives
    };
    std::vector<EmptyCell> empty_cells;

    // Optional per-sample prediction fields (age/sex score/face count).
    bool with_predictions = false;
    double sex_score_sd = 0.12;
    double sex_score_mean_male = 0.78;
    double sex_score_mean_female = 0.22;
    std::uint64_t n_face_zero = 0;   // planted counts; the rest get face_count 1
    std::uint64_t n_face_multi = 0;
    std::vector<std::string> age_bins = {"20-29"};
    std::optional<std::string> variant;
};

struct ScoresGroundTruth {
    // group -> concept -> (n_pos, n_neg)
    std::map<std::string, std::map<std::string, std::pair<std::uint64_t, std::uint64_t>>> counts;
    std::map<std::string, double> planted_shift;  // "concept|group" -> delta
    std::uint64_t n_samples = 0;
    std::uint64_t n_face_zero = 0;
    std::uint64_t n_face_one = 0;
    std::uint64_t n_face_multi = 0;
};

struct SynthScores {
    std::string samples_csv;
    std::string scores_csv;
    ScoresGroundTruth truth;
};

inline SynthScores generate_scores(const DisparityPlan& plan) {
    if (plan.concepts.empty())
        fail(errc::degenerate_input, "plan needs at least one concept");
    if (plan.n_per_group < 1)
        fail(errc::degenerate_input, "n_per_group must be >= 1");

    Rng rng(plan.seed);
    SynthScores out;

    std::map<std::string, double> shift_of;
    for (const auto& s : plan.shifts) {
        shift_of[s.concept_name + "|" + s.group] = s.delta;
        out.truth.planted_shift[s.concept_name + "|" + s.group] = s.delta;
    }
    std::map<std::string, int> empty_of;  // 1: no pos, 2: no neg
    for (const auto& c : plan.empty_cells)
        empty_of[c.concept_name + "|" + c.group] = c.empty_pos ? 1 : 2;

    std::ostringstream samples;
    std::ostringstream scores;
    samples << "sample_id,sex,ethnicity,age_bin,variant,annotations\n";
    scores << "sample_id,concept,score,face_count,predicted_age,predicted_sex_score\n";

    // Planted face counts are dealt out deterministically across the
    // sample sequence.
    const std::uint64_t total_samples =
        std::uint64_t(plan.ethnicities.size()) * 2 * std::uint64_t(plan.n_per_group);
    std::uint64_t face_zero_left = plan.n_face_zero;
    std::uint64_t face_multi_left = plan.n_face_multi;

    std::uint64_t sample_no = 0;
    for (const auto& eth : plan.ethnicities) {
        for (Sex sex : {Sex::Male, Sex::Female}) {
            const std::string group = eth + " " + sex_tag(sex);
            for (int i = 0; i < plan.n_per_group; ++i, ++sample_no) {
                char idbuf[16];
                std::snprintf(idbuf, sizeof idbuf, "s%06llu",
                              static_cast<unsigned long long>(sample_no));
                const std::string sample_id = idbuf;
                const std::string& age_bin =
                    plan.age_bins[sample_no % plan.age_bins.size()];

                std::string annotations;
                std::vector<std::pair<std::string, bool>> assigned;
                for (const auto& concept_name : plan.concepts) {
                    const auto empty_it = empty_of.find(concept_name + "|" + group);
                    bool positive = rng.next_unit() < plan.pos_rate;
                    if (empty_it != empty_of.end())
                        positive = empty_it->second == 2;  // no-neg cell: all pos
                    assigned.emplace_back(concept_name, positive);
                    if (!annotations.empty()) annotations += ";";
                    annotations += concept_name + (positive ? ":pos" : ":neg");
                    auto& cell = out.truth.counts[group][concept_name];
                    if (positive) ++cell.first;
                    else ++cell.second;
                }

                samples << sample_id << "," << sex_tag(sex) << "," << eth << ","
                        << age_bin << "," << plan.variant.value_or("") << ","
                        << annotations << "\n";

                int face_count = 1;
                if (plan.with_predictions) {
                    if (face_zero_left > 0 && sample_no % 3 == 0) {
                        face_count = 0;
                        --face_zero_left;
                    } else if (face_multi_left > 0 && sample_no % 3 == 1) {
                        face_count = 2 + int(rng.next_index(3));
                        --face_multi_left;
                    }
                    if (face_count == 0) ++out.truth.n_face_zero;
                    else if (face_count == 1) ++out.truth.n_face_one;
                    else ++out.truth.n_face_multi;
                }

                // Per-sample prediction fields, repeated on every score row
                // of the sample (consumers dedupe by sample_id).
                std::string prediction_cells = ",,,";
                if (plan.with_predictions) {
                    const auto range = age_bin_range(age_bin);
                    const double age =
                        range->lo + rng.next_unit() * (range->hi - range->lo);
                    const double sex_mean = sex == Sex::Male
                                                ? plan.sex_score_mean_male
                                                : plan.sex_score_mean_female;
                    const double sex_score = rng.next_truncated_normal(
                        sex_mean, plan.sex_score_sd, 0.0, 1.0);
                    prediction_cells = "," + std::to_string(face_count) + "," +
                                       format_real(age) + "," +
                                       format_real(sex_score);
                }
                for (const auto& [concept_name, positive] : assigned) {
                    double mean = plan.base_mean + (positive ? plan.pos_gap : 0.0);
                    auto sh = shift_of.find(concept_name + "|" + group);
                    if (sh != shift_of.end()) mean += sh->second;
                    const double score =
                        rng.next_truncated_normal(mean, plan.base_sd, 0.0, 1.0);
                    scores << sample_id << "," << concept_name << ","
                           << format_real(score) << prediction_cells << "\n";
                }
            }
        }
    }
    out.truth.n_samples = total_samples;
    out.samples_csv = samples.str();
    out.scores_csv = scores.str();
    return out;
}

inline nlohmann::ordered_json scores_truth_to_json(const ScoresGroundTruth& t) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json counts;
    for (const auto& [group, concepts] : t.counts) {
        nlohmann::ordered_json per_group;
        for (const auto& [concept_name, pn] : concepts) {
            per_group[concept_name] = {{"pos", pn.first}, {"neg", pn.second}};
        }
        counts[group] = std::move(per_group);
    }
    j["counts"] = std::move(counts);
    j["planted_shift"] = t.planted_shift;
    j["n_samples"] = t.n_samples;
    j["face_counts"] = {{"zero", t.n_face_zero},
                        {"one", t.n_face_one},
                        {"multi", t.n_face_multi}};
    return j;
}

inline DisparityPlan scores_plan_from_json(const nlohmann::json& j) {
    DisparityPlan p;
    p.seed = j.value("seed", std::uint64_t(1));
    if (j.contains("ethnicities"))
        p.ethnicities = j.at("ethnicities").get<std::vector<std::string>>();
    if (j.contains("concepts"))
        p.concepts = j.at("concepts").get<std::vector<std::string>>();
    p.n_per_group = j.value("n_per_group", 100);
    p.base_mean = j.value("base_mean", 0.3);
    p.base_sd = j.value("base_sd", 0.1);
    p.pos_rate = j.value("pos_rate", 0.5);
    p.pos_gap = j.value("pos_gap", 0.3);
    if (j.contains("shifts"))
        for (const auto& s : j.at("shifts"))
            p.shifts.push_back({s.at("concept").get<std::string>(),
                                s.at("group").get<std::string>(),
                                s.at("delta").get<double>()});
    if (j.contains("empty_cells"))
        for (const auto& c : j.at("empty_cells"))
            p.empty_cells.push_back({c.at("concept").get<std::string>(),
                                     c.at("group").get<std::string>(),
                                     c.value("empty_pos", true)});
    p.with_predictions = j.value("with_predictions", false);
    p.n_face_zero = j.value("n_face_zero", std::uint64_t(0));
    p.n_face_multi = j.value("n_face_multi", std::uint64_t(0));
    if (j.contains("age_bins"))
        p.age_bins = j.at("age_bins").get<std::vector<std::string>>();
    if (j.contains("variant")) p.variant = j.at("variant").get<std::string>();
    return p;
}

}  // namespace mlaudit
