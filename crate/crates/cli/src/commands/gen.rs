//! Instance generation: materialize DIMACS files and compiled-instance JSON
//! documents under `<out>/instances/`.

use fh_core::cnf::{compile_to_network, parse_dimacs, planted_3cnf, random_3cnf, CnfFormula};
use fh_core::seeds::mix_seed;

use crate::config::{ExperimentConfig, InstanceSpec};
use crate::error::{CliError, CliResult};

use super::{ensure_dir, instance_stem, instances_dir, write_file};

fn formula_for(config: &ExperimentConfig, index: usize) -> CliResult<CnfFormula> {
    let seed = mix_seed(config.seed, index as u64, 100);
    match &config.instances {
        InstanceSpec::Random { m, k, .. } => Ok(random_3cnf(*m, *k, seed)?),
        InstanceSpec::Planted { m, k, .. } => Ok(planted_3cnf(*m, *k, seed)?.0),
        InstanceSpec::Files { paths } => {
            let path = &paths[index];
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            Ok(parse_dimacs(&text)?)
        }
    }
}

pub fn run(config: &ExperimentConfig) -> CliResult<String> {
    if let InstanceSpec::Random { m, .. } | InstanceSpec::Planted { m, .. } = config.instances {
        if m > fh_core::cnf::SAT_ORACLE_MAX_VARS {
            return Err(CliError::Guard(format!(
                "m = {m} exceeds the enumeration oracle limit of {}; instances would not be ground-truth-checkable",
                fh_core::cnf::SAT_ORACLE_MAX_VARS
            )));
        }
    }
    let dir = instances_dir(&config.output_dir);
    ensure_dir(&dir)?;
    let count = config.instances.count();
    for index in 0..count {
        let formula = formula_for(config, index)?;
        if formula.num_vars > fh_core::cnf::SAT_ORACLE_MAX_VARS {
            return Err(CliError::Guard(format!(
                "instance {index} has m = {} variables, over the oracle limit {}",
                formula.num_vars,
                fh_core::cnf::SAT_ORACLE_MAX_VARS
            )));
        }
        let instance = compile_to_network(&formula)?;
        let stem = instance_stem(index);
        write_file(&dir.join(format!("{stem}.cnf")), &formula.to_dimacs())?;
        write_file(&dir.join(format!("{stem}.json")), &instance.to_json())?;
    }
    Ok(format!("gen: wrote {count} instances to {}", dir.display()))
}
