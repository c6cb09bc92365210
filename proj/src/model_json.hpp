#pragma once

#include <string>

#include <json.hpp>

#include "mmlda/hierarchy.hpp"
#include "mmlda/topic_model.hpp"

namespace mmlda {

// serialized floats carry 12 significant digits
double round12(double v);
nlohmann::json matrix_to_json(const Array2D<double>& m);
Array2D<double> matrix_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::json spec_to_json(const HierarchySpec& spec);
HierarchySpec spec_from_json(const nlohmann::json& j);

}  // namespace mmlda
