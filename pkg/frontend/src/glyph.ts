/** Deterministic color glyphs for images that have no image_path (synthetic
 * runs). The glyph is a small grid whose cell colors are a pure function of
 * the feature vector, so the same tracklet always looks the same and nearby
 * features look similar. */

export interface Glyph {
  /** grid is size x size cells, row-major */
  size: number;
  /** css color per cell */
  cells: string[];
}

export function featureGlyph(feature: number[]): Glyph {
  if (feature.length === 0) {
    return { size: 1, cells: ['hsl(0, 0%, 50%)'] };
  }
  const size = Math.ceil(Math.sqrt(feature.length));
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of feature) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const span = hi - lo || 1;
  const cells: string[] = [];
  for (let i = 0; i < size * size; i++) {
    if (i >= feature.length) {
      cells.push('hsl(0, 0%, 12%)');
      continue;
    }
    const t = (feature[i] - lo) / span; // 0..1 within this vector
    const hue = Math.round(300 * t); // red .. magenta, no wrap-around
    const light = Math.round(25 + 50 * t);
    cells.push(`hsl(${hue}, 70%, ${light}%)`);
  }
  return { size, cells };
}

export function glyphSvg(feature: number[], px = 64): string {
  const glyph = featureGlyph(feature);
  const cell = px / glyph.size;
  const rects = glyph.cells
    .map((color, i) => {
      const x = (i % glyph.size) * cell;
      const y = Math.floor(i / glyph.size) * cell;
      return `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${cell.toFixed(2)}" height="${cell.toFixed(2)}" fill="${color}"/>`;
    })
    .join('');
  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${px} ${px}" width="${px}" height="${px}" role="img">${rects}</svg>`;
}
