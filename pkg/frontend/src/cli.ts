#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { ARCHITECTURES, exportModel } from "./export.js";
import { DATASETS } from "./data.js";

await yargs(hideBin(process.argv))
  .scriptName("weights-export")
  .command(
    "export",
    "train a reference model and write weights, fixtures, and metadata",
    (y) =>
      y
        .option("dataset", { type: "string", demandOption: true, choices: [...DATASETS] })
        .option("arch", { type: "string", demandOption: true, choices: [...ARCHITECTURES] })
        .option("seed", { type: "number", default: 0 })
        .option("out", { type: "string", demandOption: true, describe: "output directory" }),
    (argv) => {
      const result = exportModel(argv.dataset, argv.arch, argv.seed, argv.out);
      const acc = result.meta.test_accuracy;
      const accText = acc === null ? "n/a" : (acc as number).toFixed(4);
      console.log(
        `${result.name}: test accuracy ${accText}, ` +
          `${result.fixtures.length} fixtures -> ${result.paths.weights}`
      );
    }
  )
  .demandCommand(1)
  .strict()
  .help()
  .parseAsync();
