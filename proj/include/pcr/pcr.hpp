#pragma once

#include "pcr/bayes_net.hpp"
#include "pcr/circuit.hpp"
#include "pcr/common.hpp"
#include "pcr/grammar.hpp"
#include "pcr/io.hpp"
#include "pcr/labelling.hpp"
#include "pcr/logical.hpp"
#include "pcr/oracle.hpp"
#include "pcr/product.hpp"
#include "pcr/properties.hpp"
#include "pcr/random.hpp"
#include "pcr/restructure.hpp"
#include "pcr/vtree.hpp"
