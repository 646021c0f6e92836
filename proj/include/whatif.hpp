#pragma once

// Engine umbrella header. The HTTP transport lives in whatif/http.hpp.
#include "whatif/causal_graph.hpp"
#include "whatif/dataset.hpp"
#include "whatif/error.hpp"
#include "whatif/json_io.hpp"
#include "whatif/least_squares.hpp"
#include "whatif/lime.hpp"
#include "whatif/scm.hpp"
#include "whatif/service.hpp"
#include "whatif/shap.hpp"
#include "whatif/subgroup.hpp"
