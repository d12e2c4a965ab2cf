#pragma once

#include <string>

#include "pamk/models.hpp"

namespace pamk::io {

/// JSON document with a meta block (type, K, M, feature layout, index arrays,
/// normalization scales) and named parameter arrays with explicit shapes,
/// full double precision.
void write_model(const models::TrainedModel& model, const std::string& path);

models::TrainedModel read_model(const std::string& path);

} // namespace pamk::io
