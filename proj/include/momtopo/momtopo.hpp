#pragma once

// Umbrella header. The JSON configuration reader lives in momtopo/config.hpp
// and is not included here.

#include "momtopo/core.hpp"
#include "momtopo/mesh.hpp"
#include "momtopo/quadrature.hpp"
#include "momtopo/spherical.hpp"
#include "momtopo/parallel.hpp"
#include "momtopo/operators.hpp"
#include "momtopo/container.hpp"
#include "momtopo/shapes.hpp"
#include "momtopo/metrics.hpp"
#include "momtopo/reanalysis.hpp"
#include "momtopo/bounds.hpp"
#include "momtopo/optimizer.hpp"
