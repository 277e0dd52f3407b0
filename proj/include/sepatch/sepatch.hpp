#pragma once

#include "sepatch/attention.hpp"
#include "sepatch/budget.hpp"
#include "sepatch/config.hpp"
#include "sepatch/cost.hpp"
#include "sepatch/embedding.hpp"
#include "sepatch/encoder.hpp"
#include "sepatch/enhancement.hpp"
#include "sepatch/error.hpp"
#include "sepatch/geometry.hpp"
#include "sepatch/gradcheck.hpp"
#include "sepatch/image.hpp"
#include "sepatch/numerics.hpp"
#include "sepatch/pipeline.hpp"
#include "sepatch/report.hpp"
#include "sepatch/simulator.hpp"
#include "sepatch/spss.hpp"
#include "sepatch/text.hpp"
