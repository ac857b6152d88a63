#pragma once

#include "supcbi/bke.hpp"
#include "supcbi/config.hpp"
#include "supcbi/control.hpp"
#include "supcbi/csv.hpp"
#include "supcbi/error.hpp"
#include "supcbi/identify.hpp"
#include "supcbi/lift.hpp"
#include "supcbi/measures.hpp"
#include "supcbi/model.hpp"
#include "supcbi/random.hpp"
#include "supcbi/simulate.hpp"
#include "supcbi/special.hpp"
