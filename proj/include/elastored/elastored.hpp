#pragma once

#include "elastored/cnn.hpp"
#include "elastored/config_io.hpp"
#include "elastored/denoisers.hpp"
#include "elastored/errors.hpp"
#include "elastored/fem.hpp"
#include "elastored/field_io.hpp"
#include "elastored/mesh.hpp"
#include "elastored/metrics.hpp"
#include "elastored/phantom.hpp"
#include "elastored/pipeline.hpp"
#include "elastored/raster.hpp"
#include "elastored/red_solver.hpp"
#include "elastored/rng.hpp"
#include "elastored/stat_model.hpp"
#include "elastored/types.hpp"
