import { renderDivisibility } from "../divisibility.js";
import { parseArgs } from "../render.js";

const { input, out } = parseArgs(process.argv.slice(2), "plot-divisibility");
renderDivisibility(input, out);
console.log(out);
