import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { debounce } from "../src/debounce.js";

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("collapses a burst into one trailing call", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 150);
    d(1);
    vi.advanceTimersByTime(50);
    d(2);
    vi.advanceTimersByTime(50);
    d(3);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(149);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual([3]);
  });

  it("separate windows fire separately", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 100);
    d(1);
    vi.advanceTimersByTime(100);
    d(2);
    vi.advanceTimersByTime(100);
    expect(calls).toEqual([1, 2]);
  });

  it("cancel drops the pending call", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 100);
    d(1);
    d.cancel();
    vi.advanceTimersByTime(500);
    expect(calls).toEqual([]);
  });

  it("flush fires immediately", () => {
    const calls: number[] = [];
    const d = debounce((v: number) => calls.push(v), 100);
    d(7);
    d.flush();
    expect(calls).toEqual([7]);
    vi.advanceTimersByTime(500);
    expect(calls).toEqual([7]);
  });
});
