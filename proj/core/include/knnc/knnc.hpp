#pragma once

#include "knnc/ans.hpp"
#include "knnc/calibrate.hpp"
#include "knnc/datastore.hpp"
#include "knnc/error.hpp"
#include "knnc/fr.hpp"
#include "knnc/gradcheck.hpp"
#include "knnc/io.hpp"
#include "knnc/optim.hpp"
#include "knnc/protocol.hpp"
#include "knnc/report.hpp"
#include "knnc/rng.hpp"
#include "knnc/synthgen.hpp"
#include "knnc/types.hpp"
