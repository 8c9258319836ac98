#pragma once

#include "itl_pursuit/classifier.hpp"
#include "itl_pursuit/correlation.hpp"
#include "itl_pursuit/core.hpp"
#include "itl_pursuit/experiments.hpp"
#include "itl_pursuit/nok.hpp"
#include "itl_pursuit/pursuit.hpp"
#include "itl_pursuit/version.hpp"
