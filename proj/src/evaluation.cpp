#include "stagewise/evaluation.hpp"

#include "stagewise/error.hpp"
#include "stagewise/rng.hpp"
#include "stagewise/serialize.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <thread>

namespace stagewise {

std::string candidate_key(const Candidate &c) {
    std::string key = c.scaler.value_or("-");
    key.push_back('|');
    if (c.features) {
        for (std::size_t i = 0; i < c.features->size(); ++i) {
            if (i > 0) {
                key.push_back(',');
            }
            key += std::to_string(c.features->indices()[i]);
        }
    } else {
        key.push_back('-');
    }
    key.push_back('|');
    if (c.learner.meta) {
        key += c.learner.meta->id + "[" +
               (c.learner.meta->params ? format_params(*c.learner.meta->params) : std::string("default")) + "](" +
               c.learner.learner + ")";
    } else {
        key += c.learner.learner;
    }
    key.push_back('|');
    key += c.learner.params ? format_params(*c.learner.params) : std::string("default");
    return key;
}

void validate(const EvalConfig &cfg) {
    if (cfg.repeats < 1) {
        throw invalid_argument("repeats must be at least 1");
    }
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw invalid_argument("train_fraction must lie in (0, 1)");
    }
    if (cfg.metric != "error_rate") {
        throw invalid_argument("unsupported metric '" + cfg.metric + "'");
    }
    if (cfg.per_eval_timeout.count() < 0.0) {
        throw invalid_argument("per_eval_timeout must be non-negative");
    }
}

std::string to_string(ScoreStatus status) {
    switch (status) {
    case ScoreStatus::ok:
        return "ok";
    case ScoreStatus::failed_timeout:
        return "failed_timeout";
    case ScoreStatus::failed_error:
        return "failed_error";
    }
    return "failed_error";
}

ScoreStatus score_status_from_string(const std::string &s) {
    if (s == "ok") {
        return ScoreStatus::ok;
    }
    if (s == "failed_timeout") {
        return ScoreStatus::failed_timeout;
    }
    if (s == "failed_error") {
        return ScoreStatus::failed_error;
    }
    throw parse_error("unknown score status '" + s + "'");
}

double error_rate(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.empty() || truth.size() != predicted.size()) {
        throw invalid_argument("error_rate needs non-empty vectors of equal length");
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        wrong += truth[i] != predicted[i] ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Pipelines

std::vector<int> FittedPipeline::predict(const Matrix &rows, const Deadline &deadline) const {
    if (rows.rows() == 0) {
        return {};
    }
    const Matrix scaled = scaler_ ? scaler_->transform(rows) : rows;
    if (features_) {
        return model_.predict(scaled.select_cols(features_->indices()), deadline);
    }
    return model_.predict(scaled, deadline);
}

Pipeline::Pipeline(const Registry &registry, Candidate candidate) : registry_(&registry), candidate_(std::move(candidate)) {
    if (candidate_.scaler) {
        (void)registry.scaler(*candidate_.scaler);
    }
    if (candidate_.features && candidate_.features->empty()) {
        throw invalid_argument("feature set must not be empty");
    }
    registry.validate(candidate_.learner);
}

FittedPipeline Pipeline::fit(const Dataset &train, std::uint64_t seed, const Deadline &deadline) const {
    std::shared_ptr<const FittedScaler> scaler;
    const Matrix *x = &train.instances();
    Matrix scaled;
    if (candidate_.scaler) {
        scaler = registry_->fit_scaler(*candidate_.scaler, train.instances());
        scaled = scaler->transform(train.instances());
        x = &scaled;
    }
    Matrix projected;
    if (candidate_.features) {
        if (candidate_.features->indices().back() >= train.cols()) {
            throw invalid_argument("feature index out of range");
        }
        projected = x->select_cols(candidate_.features->indices());
        x = &projected;
    }
    auto model = registry_->fit(candidate_.learner, *x, train.labels(), train.n_classes(), seed, deadline);
    return FittedPipeline(std::move(scaler), candidate_.features, std::move(model));
}

// ---------------------------------------------------------------------------
// MCCV

std::vector<SplitIndices> mccv_splits(const Dataset &d, const EvalConfig &cfg, std::size_t repeats) {
    const auto counts = d.class_counts();
    std::size_t present = 0;
    bool singleton = false;
    for (const auto c : counts) {
        present += c > 0 ? 1 : 0;
        singleton = singleton || c == 1;
    }
    const bool stratified = cfg.stratified && present >= 2 && !singleton;
    std::vector<SplitIndices> out;
    out.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        const SplitSpec spec{cfg.train_fraction, derive_seed(cfg.seed, "mccv/" + std::to_string(r))};
        out.push_back(split_indices(d.labels(), d.n_classes(), spec, stratified));
    }
    return out;
}

std::uint64_t evaluation_seed(const EvalConfig &cfg, const std::string &key, std::size_t repeat) {
    return derive_seed(derive_seed(cfg.seed, key), repeat);
}

std::vector<Score> Scorer::score_many(std::span<const Candidate> cs, const Dataset &d, const ScoreRequest &request) {
    std::vector<Score> out;
    out.reserve(cs.size());
    for (const auto &c : cs) {
        out.push_back(score(c, d, request));
    }
    return out;
}

Evaluator::Evaluator(const Registry &registry, EvalConfig cfg, bool cache_enabled, std::size_t workers)
    : registry_(&registry), cfg_(std::move(cfg)), cache_enabled_(cache_enabled), workers_(std::max<std::size_t>(workers, 1)) {
    validate(cfg_);
}

std::string Evaluator::cache_key(const std::string &candidate_key, const Dataset &d, std::size_t repeats) const {
    std::uint64_t h = fnv1a(cfg_.metric, mix64(repeats));
    h = mix64(h ^ std::bit_cast<std::uint64_t>(cfg_.train_fraction));
    h = mix64(h ^ cfg_.seed);
    h = mix64(h ^ std::bit_cast<std::uint64_t>(cfg_.per_eval_timeout.count()));
    h = mix64(h ^ (cfg_.stratified ? 1U : 0U));
    return candidate_key + "#" + std::to_string(d.content_hash()) + "#" + std::to_string(h);
}

std::optional<Score> Evaluator::recall(const std::string &key) {
    if (!cache_enabled_) {
        return std::nullopt;
    }
    std::lock_guard lock(mutex_);
    const auto it = cache_.find(key);
    if (it == cache_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void Evaluator::remember(const std::string &key, const Score &score) {
    if (!cache_enabled_) {
        return;
    }
    std::lock_guard lock(mutex_);
    cache_[key] = score;
    if (cache_stream_) {
        json j = score_to_json(score);
        j["cache_key"] = key;
        *cache_stream_ << j.dump() << '\n';
        cache_stream_->flush();
    }
}

void Evaluator::record(const JournalRecord &r) {
    std::lock_guard lock(mutex_);
    journal_.push_back(r);
    if (journal_stream_) {
        *journal_stream_ << journal_record_to_json(r).dump() << '\n';
        journal_stream_->flush();
    }
}

std::vector<JournalRecord> Evaluator::journal() const {
    std::lock_guard lock(mutex_);
    return journal_;
}

void Evaluator::stream_journal(const std::filesystem::path &path) {
    auto stream = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*stream) {
        throw error("cannot write journal '" + path.string() + "'");
    }
    std::lock_guard lock(mutex_);
    journal_stream_ = std::move(stream);
}

void Evaluator::attach_cache_file(const std::filesystem::path &path) {
    std::lock_guard lock(mutex_);
    if (std::ifstream in(path); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            const auto j = json::parse(line);
            Score s;
            s.mean = j.at("mean").get<double>();
            s.std = j.at("std").get<double>();
            s.per_fold = j.at("per_fold").get<std::vector<double>>();
            s.status = score_status_from_string(j.at("status").get<std::string>());
            s.message = j.value("message", std::string{});
            cache_[j.at("cache_key").get<std::string>()] = s;
        }
    }
    cache_stream_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::app);
    if (!*cache_stream_) {
        throw error("cannot write cache file '" + path.string() + "'");
    }
}

std::pair<Score, JournalRecord> Evaluator::evaluate(const Candidate &c, const Dataset &d, const ScoreRequest &request) {
    const auto start = clock::now();
    const std::string key = candidate_key(c);
    const std::size_t repeats = request.repeats.value_or(cfg_.repeats);
    const Pipeline pipeline(*registry_, c);

    const Deadline own = Deadline::after(cfg_.per_eval_timeout);
    const Deadline deadline = own.clip(request.deadline);

    Score score;
    const auto counts = d.class_counts();
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t n) { return n > 0; });
    if (d.empty()) {
        score.status = ScoreStatus::failed_error;
        score.message = "empty dataset";
    } else if (present < 2) {
        score.per_fold.assign(repeats, 0.0);
    } else {
        try {
            const auto splits = mccv_splits(d, cfg_, repeats);
            for (std::size_t r = 0; r < repeats; ++r) {
                deadline.check();
                const Dataset train = d.subset(splits[r].train);
                const Dataset validation = d.subset(splits[r].test);
                if (observer_) {
                    observer_(train, validation);
                }
                const auto fitted = pipeline.fit(train, evaluation_seed(cfg_, key, r), deadline);
                const auto predicted = fitted.predict(validation.instances(), deadline);
                score.per_fold.push_back(error_rate(validation.labels(), predicted));
            }
        } catch (const timeout_error &) {
            score.status = ScoreStatus::failed_timeout;
            score.message = "deadline exceeded";
        } catch (const std::exception &e) {
            score.status = ScoreStatus::failed_error;
            score.message = e.what();
        }
    }
    if (score.ok()) {
        score.mean = std::accumulate(score.per_fold.begin(), score.per_fold.end(), 0.0) /
                     static_cast<double>(score.per_fold.size());
        double ss = 0.0;
        for (const double v : score.per_fold) {
            ss += (v - score.mean) * (v - score.mean);
        }
        score.std = std::sqrt(ss / static_cast<double>(score.per_fold.size()));
    } else {
        score.per_fold.clear();
    }

    JournalRecord rec;
    rec.candidate_key = key;
    rec.stage = request.stage;
    rec.mean = score.mean;
    rec.std = score.std;
    rec.per_fold = score.per_fold;
    rec.status = score.status;
    rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    rec.seed = derive_seed(cfg_.seed, key);
    rec.message = score.message;

    // Timeouts caused by the caller's deadline are not cached.
    const bool external_timeout = score.status == ScoreStatus::failed_timeout && request.deadline.bounded() &&
                                  *request.deadline.at() < *own.at();
    if (!external_timeout) {
        remember(cache_key(key, d, repeats), score);
    }
    evaluations_.fetch_add(1);
    return {std::move(score), std::move(rec)};
}

Score Evaluator::score(const Candidate &c, const Dataset &d, const ScoreRequest &request) {
    const std::size_t repeats = request.repeats.value_or(cfg_.repeats);
    if (auto hit = recall(cache_key(candidate_key(c), d, repeats))) {
        cache_hits_.fetch_add(1);
        return *hit;
    }
    auto [score, rec] = evaluate(c, d, request);
    record(rec);
    return score;
}

std::vector<Score> Evaluator::score_many(std::span<const Candidate> cs, const Dataset &d, const ScoreRequest &request) {
    if (workers_ <= 1 || cs.size() <= 1) {
        return Scorer::score_many(cs, d, request);
    }
    const std::size_t repeats = request.repeats.value_or(cfg_.repeats);
    std::vector<std::optional<Score>> scores(cs.size());
    std::vector<std::optional<JournalRecord>> records(cs.size());
    std::vector<std::exception_ptr> errors(cs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < cs.size(); i = next.fetch_add(1)) {
            try {
                if (auto hit = recall(cache_key(candidate_key(cs[i]), d, repeats))) {
                    cache_hits_.fetch_add(1);
                    scores[i] = std::move(hit);
                    continue;
                }
                auto [score, rec] = evaluate(cs[i], d, request);
                scores[i] = std::move(score);
                records[i] = std::move(rec);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers_, cs.size()); ++w) {
            pool.emplace_back(work);
        }
    }
    std::vector<Score> out;
    out.reserve(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
        if (errors[i]) {
            std::rethrow_exception(errors[i]);
        }
        if (records[i]) {
            record(*records[i]);
        }
        out.push_back(std::move(*scores[i]));
    }
    return out;
}

Score mccv_score(const Candidate &c, const Dataset &d, const EvalConfig &cfg, const Registry &registry) {
    Evaluator evaluator(registry, cfg, false);
    return evaluator.score(c, d, ScoreRequest{"direct", {}, std::nullopt});
}

}  // namespace stagewise
