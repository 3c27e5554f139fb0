import { renderGapSweep } from "../gapSweep.js";
import { parseArgs } from "../render.js";

const { input, out } = parseArgs(process.argv.slice(2), "plot-gap-sweep");
renderGapSweep(input, out);
console.log(out);
