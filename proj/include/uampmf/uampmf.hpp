#pragma once

#include "uampmf/version.hpp"
#include "uampmf/core.hpp"
#include "uampmf/denoisers.hpp"
#include "uampmf/uamp.hpp"
#include "uampmf/engine.hpp"
#include "uampmf/datagen.hpp"
#include "uampmf/metrics.hpp"
#include "uampmf/matrix_io.hpp"
#include "uampmf/applications.hpp"
#include "uampmf/experiment.hpp"
