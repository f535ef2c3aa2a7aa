#include "stagewise/serialize.hpp"

#include "stagewise/error.hpp"

namespace stagewise {

json param_value_to_json(const ParamValue &v) {
    return std::visit([](const auto &x) { return json(x); }, v);
}

ParamValue param_value_from_json(const json &j) {
    if (j.is_boolean()) {
        return j.get<bool>();
    }
    if (j.is_number_integer()) {
        return j.get<std::int64_t>();
    }
    if (j.is_number_float()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        return j.get<std::string>();
    }
    throw parse_error("unsupported parameter value: " + j.dump());
}

json params_to_json(const ParamMap &p) {
    json j = json::object();
    for (const auto &[name, value] : p) {
        j[name] = param_value_to_json(value);
    }
    return j;
}

ParamMap params_from_json(const json &j) {
    ParamMap p;
    for (const auto &[name, value] : j.items()) {
        p.emplace(name, param_value_from_json(value));
    }
    return p;
}

json candidate_to_json(const Candidate &c) {
    json j;
    j["scaler"] = c.scaler ? json(*c.scaler) : json(nullptr);
    j["features"] = c.features ? json(c.features->indices()) : json(nullptr);
    j["learner"] = c.learner.learner;
    j["params"] = c.learner.params ? params_to_json(*c.learner.params) : json(nullptr);
    if (c.learner.meta) {
        j["meta"] = {{"id", c.learner.meta->id},
                     {"params", c.learner.meta->params ? params_to_json(*c.learner.meta->params) : json(nullptr)}};
    } else {
        j["meta"] = nullptr;
    }
    return j;
}

Candidate candidate_from_json(const json &j) {
    Candidate c;
    if (!j.at("scaler").is_null()) {
        c.scaler = j.at("scaler").get<std::string>();
    }
    if (!j.at("features").is_null()) {
        c.features = FeatureSet(j.at("features").get<std::vector<std::size_t>>());
    }
    c.learner.learner = j.at("learner").get<std::string>();
    if (!j.at("params").is_null()) {
        c.learner.params = params_from_json(j.at("params"));
    }
    if (j.contains("meta") && !j.at("meta").is_null()) {
        MetaChoice m{j.at("meta").at("id").get<std::string>(), std::nullopt};
        if (!j.at("meta").at("params").is_null()) {
            m.params = params_from_json(j.at("meta").at("params"));
        }
        c.learner.meta = std::move(m);
    }
    return c;
}

json score_to_json(const Score &s) {
    json j;
    j["mean"] = s.mean;
    j["std"] = s.std;
    j["per_fold"] = s.per_fold;
    j["status"] = to_string(s.status);
    if (!s.message.empty()) {
        j["message"] = s.message;
    }
    return j;
}

json journal_record_to_json(const JournalRecord &r) {
    json j;
    j["candidate_key"] = r.candidate_key;
    j["stage"] = r.stage;
    j["mean"] = r.mean;
    j["std"] = r.std;
    j["per_fold"] = r.per_fold;
    j["status"] = to_string(r.status);
    j["wall_ms"] = r.wall_ms;
    j["seed"] = r.seed;
    if (!r.message.empty()) {
        j["message"] = r.message;
    }
    return j;
}

JournalRecord journal_record_from_json(const json &j) {
    JournalRecord r;
    r.candidate_key = j.at("candidate_key").get<std::string>();
    r.stage = j.at("stage").get<std::string>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    r.per_fold = j.at("per_fold").get<std::vector<double>>();
    r.status = score_status_from_string(j.at("status").get<std::string>());
    r.wall_ms = j.at("wall_ms").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.message = j.value("message", std::string{});
    return r;
}

namespace {

json domain_to_json(const Domain &d) {
    if (const auto *c = std::get_if<CategoricalDomain>(&d)) {
        json values = json::array();
        for (const auto &v : c->values) {
            values.push_back(param_value_to_json(v));
        }
        return {{"kind", "categorical"}, {"values", values}};
    }
    if (const auto *i = std::get_if<IntRangeDomain>(&d)) {
        return {{"kind", "int_range"}, {"lo", i->lo}, {"hi", i->hi}};
    }
    const auto &l = std::get<LogUniformDomain>(d);
    return {{"kind", "log_uniform"}, {"lo", l.lo}, {"hi", l.hi}};
}

}  // namespace

json registry_to_json(const Registry &r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    json learners = json::array();
    for (const auto &spec : r.learners()) {
        json space = json::object();
        for (const auto &[name, domain] : spec.param_space) {
            space[name] = domain_to_json(domain);
        }
        learners.push_back({{"id", spec.id},
                            {"is_meta", spec.is_meta},
                            {"default_params", params_to_json(spec.default_params)},
                            {"param_space", space}});
    }
    j["learners"] = learners;
    j["scalers"] = r.scaler_ids();
    j["filters"] = r.filter_ids();
    return j;
}

}  // namespace stagewise
