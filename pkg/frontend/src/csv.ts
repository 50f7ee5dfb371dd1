/** Dataset CSV parsing, display-side only.
 *
 * The server owns the data; the page re-reads the same file purely to show
 * feature values for the pair under judgment. Format: header row, comma
 * delimited, '.' radix, optional trailing "label" column of integers.
 */

export interface DisplayData {
  featureNames: string[];
  /** rows[i] holds the feature values of instance i, label excluded. */
  rows: number[][];
  labels: number[] | null;
}

export function parseDataset(text: string): DisplayData {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length < 2) {
    throw new Error("dataset needs a header and at least one row");
  }
  const header = lines[0]!.split(",");
  const hasLabel = header[header.length - 1] === "label";
  const featureNames = hasLabel ? header.slice(0, -1) : header;
  const rows: number[][] = [];
  const labels: number[] = [];
  for (let ln = 1; ln < lines.length; ln++) {
    const cells = lines[ln]!.split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${ln + 1} has ${cells.length} cells, expected ${header.length}`);
    }
    const values = cells.map((cell) => {
      const value = Number(cell);
      if (!Number.isFinite(value)) {
        throw new Error(`row ${ln + 1}: unreadable number ${JSON.stringify(cell)}`);
      }
      return value;
    });
    if (hasLabel) {
      labels.push(values[values.length - 1]!);
      rows.push(values.slice(0, -1));
    } else {
      rows.push(values);
    }
  }
  return { featureNames, rows, labels: hasLabel ? labels : null };
}
