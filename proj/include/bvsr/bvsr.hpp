#pragma once

#include "bvsr/deconvolver.hpp"
#include "bvsr/error.hpp"
#include "bvsr/flow.hpp"
#include "bvsr/image.hpp"
#include "bvsr/kernel_estimator.hpp"
#include "bvsr/metrics.hpp"
#include "bvsr/operators.hpp"
#include "bvsr/parallel.hpp"
#include "bvsr/pipeline.hpp"
#include "bvsr/png_io.hpp"
#include "bvsr/run_config.hpp"
