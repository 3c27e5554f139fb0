import { renderDecay } from "../decay.js";
import { parseArgs } from "../render.js";

const { input, out } = parseArgs(process.argv.slice(2), "plot-decay");
renderDecay(input, out);
console.log(out);
