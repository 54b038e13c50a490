squares = [i * i for i in range(5)]
big = [s for s in squares if s > 3]
print(len(big))
