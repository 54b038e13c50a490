evens = []
for k in range(5):
    if k % 2 == 0:
        evens.append(k)
print(evens)
