#pragma once

#include "stagewise/components.hpp"
#include "stagewise/evaluation.hpp"

#include <json.hpp>

namespace stagewise {

using json = nlohmann::ordered_json;

/// Version of every JSON document the library writes.
inline constexpr int kSchemaVersion = 1;

json param_value_to_json(const ParamValue &v);
ParamValue param_value_from_json(const json &j);

json params_to_json(const ParamMap &p);
ParamMap params_from_json(const json &j);

json candidate_to_json(const Candidate &c);
Candidate candidate_from_json(const json &j);

json score_to_json(const Score &s);
json journal_record_to_json(const JournalRecord &r);
JournalRecord journal_record_from_json(const json &j);

/// Ids, defaults and domains of every learner, scaler and filter.
json registry_to_json(const Registry &r);

}  // namespace stagewise
